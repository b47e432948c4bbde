"""Editable lookup tables for QA generation: vocabulary, room rules, affordances, palette."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..color_space import decode_srgb_to_linear
from ..errors import ConfigError


@dataclass(frozen=True)
class QATables:
    class_names: dict[int, str]
    structural: frozenset[str]
    flat_classes: frozenset[str]
    room_priority: tuple[str, ...]
    room_rules: dict[str, dict[str, float]]
    affordances: dict[str, tuple[str, ...]]
    palette: dict[str, tuple[int, int, int]]

    @property
    def object_classes(self) -> list[str]:
        """Non-structural vocabulary, sorted; the pool for negative recognition questions."""
        return sorted(n for n in self.class_names.values() if n not in self.structural)

    @property
    def rooms(self) -> list[str]:
        return list(self.room_priority)

    def palette_linear(self) -> tuple[list[str], np.ndarray]:
        names = list(self.palette)
        rgb = np.array([self.palette[n] for n in names], dtype=np.uint8).reshape(1, -1, 3)
        return names, decode_srgb_to_linear(rgb)[0]


def load_tables(path: str | Path | None = None) -> QATables:
    if path is None:
        text = resources.files("lowlight_eqa").joinpath("data/qa_tables.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    try:
        classes = {int(c["id"]): str(c["name"]) for c in raw["classes"]}
        structural = frozenset(str(c["name"]) for c in raw["classes"] if c.get("structural", False))
        priority = tuple(raw["room_priority"])
        rules = {room: {str(k): float(v) for k, v in table.items()} for room, table in raw["room_rules"].items()}
        affordances = {room: tuple(acts) for room, acts in raw["affordances"].items()}
        palette = {name: tuple(int(v) for v in rgb) for name, rgb in raw["palette"].items()}
        flat = frozenset(raw.get("flat_classes", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed QA tables: {exc}") from exc
    if set(rules) - set(priority):
        raise ConfigError(f"rooms missing from room_priority: {sorted(set(rules) - set(priority))}")
    if len(palette) < 4:
        raise ConfigError("palette needs at least four colors")
    return QATables(classes, structural, flat, priority, rules, affordances, palette)  # type: ignore[arg-type]
