"""Exact-match scoring and the accuracy-ladder report.

Percentages are rounded half-up to two decimals, and deltas against L0 are
differences of the rounded percentages, so a printed row always adds up
(66.55 and 59.48 give -7.07).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from ..degradation import LEVELS
from ..errors import EmptyReportError
from .runner import Condition, EvalRecord

ROW_TYPES = ((False, False), (False, True), (True, False), (True, True))  # (noise, llie), in table order
_CENT = Decimal("0.01")


def percent(correct: int, total: int) -> Decimal:
    if total <= 0:
        raise EmptyReportError("no records in cell")
    return (Decimal(100 * correct) / Decimal(total)).quantize(_CENT, rounding=ROUND_HALF_UP)


def format_percent(value: Decimal) -> str:
    return f"{value:.2f}"


def format_delta(value: Decimal) -> str:
    return f"{value:+.2f}"


@dataclass
class Cell:
    correct: int = 0
    total: int = 0
    unparseable: int = 0
    failed: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    @property
    def percent(self) -> Decimal:
        return percent(self.correct, self.total)

    def add(self, r: EvalRecord) -> None:
        self.total += 1
        self.correct += bool(r.correct)
        self.unparseable += r.status == "ok" and r.parsed is None
        self.failed += r.status != "ok"


@dataclass
class AccuracyReport:
    cells: dict[tuple[str, str], Cell] = field(default_factory=dict)  # (model, condition)
    families: dict[tuple[str, str, str], Cell] = field(default_factory=dict)  # (model, condition, family)
    levels: dict[tuple[str, str], Cell] = field(default_factory=dict)  # (model, level)
    overall: dict[str, Cell] = field(default_factory=dict)  # model

    @property
    def models(self) -> list[str]:
        return sorted(self.overall)

    def conditions(self, model: str) -> list[str]:
        return sorted((c for m, c in self.cells if m == model), key=lambda n: Condition.from_name(n))

    def delta(self, model: str, condition: str) -> Decimal | None:
        """Condition percentage minus the L0 percentage (None without an L0 cell)."""
        base = self.cells.get((model, "L0"))
        if base is None:
            return None
        return self.cells[model, condition].percent - base.percent

    def table_cells(self, model: str) -> dict[tuple[bool, bool, str], str]:
        """Dark-level cells in the ladder layout: ``(noise, llie, level) -> "59.48 (-7.07)"``."""
        out = {}
        for noise, llie in ROW_TYPES:
            for level in LEVELS[1:]:
                name = Condition(level, noise, llie).name
                if (model, name) not in self.cells:
                    continue
                text = format_percent(self.cells[model, name].percent)
                d = self.delta(model, name)
                out[noise, llie, level] = text if d is None else f"{text} ({format_delta(d)})"
        return out

    def to_dict(self) -> dict:
        models = {}
        for m in self.models:
            conds = {}
            for name in self.conditions(m):
                cell = self.cells[m, name]
                d = self.delta(m, name)
                conds[name] = {
                    "correct": cell.correct,
                    "total": cell.total,
                    "unparseable": cell.unparseable,
                    "failed": cell.failed,
                    "accuracy": format_percent(cell.percent),
                    "delta_vs_L0": None if d is None else format_delta(d),
                    "families": {
                        f: {"correct": c.correct, "total": c.total, "accuracy": format_percent(c.percent)}
                        for (mm, cc, f), c in sorted(self.families.items())
                        if mm == m and cc == name
                    },
                }
            levels = {
                lv: format_percent(c.percent) for (mm, lv), c in sorted(self.levels.items(), key=lambda kv: LEVELS.index(kv[0][1])) if mm == m
            }
            models[m] = {"overall": format_percent(self.overall[m].percent), "levels": levels, "conditions": conds}
        return {"models": models}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "condition", "level", "noise", "llie", "family", "correct", "total", "accuracy", "delta_vs_L0"])
        for m in self.models:
            for name in self.conditions(m):
                c = Condition.from_name(name)
                cell = self.cells[m, name]
                d = self.delta(m, name)
                flags = [c.level, int(c.noise), int(c.llie)]
                w.writerow([m, name, *flags, "all", cell.correct, cell.total, format_percent(cell.percent), "" if d is None else format_delta(d)])
                for (mm, cc, fam), fc in sorted(self.families.items()):
                    if mm == m and cc == name:
                        w.writerow([m, name, *flags, fam, fc.correct, fc.total, format_percent(fc.percent), ""])
        return buf.getvalue()

    def to_markdown(self) -> str:
        header = "| Model | L0 | EV drop | Noise | LLIE | " + " | ".join(LEVELS[1:]) + " |"
        lines = [header, "|" + "---|" * (5 + len(LEVELS) - 1)]
        for m in self.models:
            base = self.cells.get((m, "L0"))
            base_text = format_percent(base.percent) if base else "n/a"
            cells = self.table_cells(m)
            for noise, llie in ROW_TYPES:
                row = [cells.get((noise, llie, lv), "") for lv in LEVELS[1:]]
                if not any(row):
                    continue
                yes = lambda flag: "yes" if flag else "no"  # noqa: E731
                lines.append(f"| {m} | {base_text} | yes | {yes(noise)} | {yes(llie)} | " + " | ".join(row) + " |")
            if not cells and base:
                lines.append(f"| {m} | {base_text} | | | | " + " | ".join([""] * (len(LEVELS) - 1)) + " |")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        try:
            return {"json": self.to_json, "csv": self.to_csv, "md": self.to_markdown}[fmt]()
        except KeyError:
            raise ValueError(f"unknown report format {fmt!r}") from None


def score(records: Iterable[EvalRecord]) -> AccuracyReport:
    """Fold records into an ``AccuracyReport``; the result does not depend on record order.

    Failed and unparseable records count as incorrect.
    """
    report = AccuracyReport()
    for r in records:
        level = Condition.from_name(r.condition).level
        report.cells.setdefault((r.model_id, r.condition), Cell()).add(r)
        report.families.setdefault((r.model_id, r.condition, r.family), Cell()).add(r)
        report.levels.setdefault((r.model_id, level), Cell()).add(r)
        report.overall.setdefault(r.model_id, Cell()).add(r)
    if not report.overall:
        raise EmptyReportError("cannot score an empty record set")
    return report
