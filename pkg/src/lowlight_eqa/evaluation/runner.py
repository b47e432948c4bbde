"""Evaluation runs: conditions, image lookup, retries and the resumable journal."""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..degradation import LEVELS, parse_level, parse_levels, variant_path
from ..errors import ConfigError, StructuralError
from .models import TransientModelError
from .prompts import PROMPT_VERSION, build_prompt, parse_response

log = logging.getLogger(__name__)

_MODIFIERS = ("noise", "llie")


@dataclass(frozen=True, order=True)
class Condition:
    level: str
    noise: bool = False
    llie: bool = False

    @property
    def name(self) -> str:
        return "+".join([self.level] + [m for m in _MODIFIERS if getattr(self, m)])

    @property
    def variant(self) -> str:
        return "noisy" if self.noise else "noise_free"

    @classmethod
    def from_name(cls, name: str) -> "Condition":
        level, *mods = name.strip().split("+")
        unknown = set(mods) - set(_MODIFIERS)
        if unknown:
            raise ConfigError(f"unknown condition modifier(s) {sorted(unknown)} in {name!r}")
        return cls(parse_level(level), "noise" in mods, "llie" in mods)


def table_conditions() -> list[Condition]:
    """L0 plus every dark level under the four EV / noise / enhancement combinations."""
    out = [Condition("L0")]
    for noise, llie in ((False, False), (True, False), (False, True), (True, True)):
        out += [Condition(lv, noise, llie) for lv in LEVELS[1:]]
    return out


def parse_conditions(spec: str) -> list[Condition]:
    """Parse e.g. ``"L0,L1..L5+noise,L3+noise+llie"`` or ``"table"``; order is preserved, duplicates dropped."""
    out: list[Condition] = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if item == "table":
            conds = table_conditions()
        else:
            levels, *mods = item.split("+")
            conds = [Condition.from_name("+".join([lv, *mods])) for lv in parse_levels(levels)]
        out += [c for c in conds if c not in out]
    if not out:
        raise ConfigError("no evaluation conditions selected")
    return out


def image_path(image_root, qa, condition: Condition, llie_root=None) -> Path:
    """``{root}/{scene}/{frame}/{level}/{noise_free|noisy}.png``; enhanced images live under ``llie_root``."""
    if condition.llie:
        if llie_root is None:
            raise ConfigError(f"condition {condition.name} needs an enhanced image root")
        image_root = llie_root
    return variant_path(image_root, qa.scene, qa.frame, condition.level, condition.variant)


@dataclass
class EvalRecord:
    qa_key: str
    family: str
    condition: str
    model_id: str
    raw_response: str | None
    parsed: str | None  # None = unparseable (scored incorrect)
    correct: bool
    latency_s: float
    n_choices: int
    status: str = "ok"  # "ok" or "failed"
    error: str | None = None
    attempts: int = 1
    prompt_version: str = PROMPT_VERSION

    @property
    def key(self) -> tuple[str, str, str]:
        return self.model_id, self.qa_key, self.condition

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(**d)


def read_journal(path: str | Path) -> list[EvalRecord]:
    """All records in file order. A torn trailing line from an interrupted write is skipped."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(EvalRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            log.warning("%s:%d: skipping unreadable journal line (%s)", path, lineno, exc)
    return records


def latest_records(records: Iterable[EvalRecord]) -> dict[tuple[str, str, str], EvalRecord]:
    """Last record per (model, qa, condition) key."""
    out: dict[tuple[str, str, str], EvalRecord] = {}
    for r in records:
        out[r.key] = r
    return out


class RateLimiter:
    """Spaces request starts at least ``1 / per_second`` apart across threads."""

    def __init__(self, per_second: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second if per_second else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock, self._sleep = clock, sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self._sleep(start - now)


def _ask(model, qa, condition, image: bytes | None, max_retries, backoff_s, limiter, sleep) -> EvalRecord:
    prompt = build_prompt(qa, blind=model.blind)
    attempts, error = 0, None
    start = time.perf_counter()
    while True:
        attempts += 1
        limiter.acquire()
        try:
            raw = model.query(prompt, image, qa, condition)
            break
        except TransientModelError as exc:
            error = str(exc)
            if attempts > max_retries:
                return _failed(model, qa, condition, error, attempts, start)
            sleep(backoff_s * 2 ** (attempts - 1))
        except Exception as exc:  # non-retryable endpoint error
            return _failed(model, qa, condition, f"{type(exc).__name__}: {exc}", attempts, start)
    idx = parse_response(raw, qa.choices)
    return EvalRecord(
        qa_key=qa.key,
        family=qa.family,
        condition=condition.name,
        model_id=model.model_id,
        raw_response=raw,
        parsed=None if idx is None else qa.choices[idx],
        correct=idx == qa.answer_index,
        latency_s=round(time.perf_counter() - start, 6),
        n_choices=len(qa.choices),
        attempts=attempts,
    )


def _failed(model, qa, condition, error, attempts, start) -> EvalRecord:
    return EvalRecord(
        qa_key=qa.key,
        family=qa.family,
        condition=condition.name,
        model_id=model.model_id,
        raw_response=None,
        parsed=None,
        correct=False,
        latency_s=round(time.perf_counter() - start, 6),
        n_choices=len(qa.choices),
        status="failed",
        error=error,
        attempts=attempts,
    )


def run_eval(
    model,
    qa_set: Sequence,
    image_root: str | Path | None,
    conditions: Sequence[Condition],
    journal: str | Path | None = None,
    llie_root: str | Path | None = None,
    jobs: int = 4,
    max_retries: int = 4,
    backoff_s: float = 0.5,
    rate_limit: float | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[EvalRecord]:
    """Ask ``model`` every (qa, condition) and return one record each, in (qa, condition) order.

    Keys already answered in ``journal`` are skipped; failed ones are retried.
    New records are appended by this thread only, as soon as each finishes.
    A blind model sees no image, so it is asked once per question under L0.
    Raises ``StructuralError`` before any request if an image is missing.
    """
    conditions = [Condition("L0")] if model.blind else list(conditions)
    tasks = [(qa, c) for qa in qa_set for c in conditions]
    paths: dict[tuple[str, str], Path] = {}
    if not model.blind:
        missing = []
        for qa, c in tasks:
            p = image_path(image_root, qa, c, llie_root)
            if not p.is_file():
                missing.append(str(p))
            paths[qa.key, c.name] = p
        if missing:
            raise StructuralError(f"{len(missing)} image(s) missing, first: {missing[0]}")

    done = latest_records(read_journal(journal)) if journal else {}
    pending = [(qa, c) for qa, c in tasks if getattr(done.get((model.model_id, qa.key, c.name)), "status", None) != "ok"]
    limiter = RateLimiter(rate_limit, sleep=sleep)
    if journal:
        Path(journal).parent.mkdir(parents=True, exist_ok=True)
    handle = open(journal, "a+b") if journal else None
    if handle and handle.tell() > 0:
        handle.seek(-1, 2)
        if handle.read(1) != b"\n":
            handle.write(b"\n")  # close a torn line left by an interrupted write

    def work(qa, c):
        image = None if model.blind else paths[qa.key, c.name].read_bytes()
        return _ask(model, qa, c, image, max_retries, backoff_s, limiter, sleep)

    pool = ThreadPoolExecutor(max_workers=max(1, jobs))
    try:
        futures = set()
        queue = iter(pending)
        # keep a bounded window in flight so an interruption loses little work
        for qa, c in queue:
            futures.add(pool.submit(work, qa, c))
            if len(futures) >= 2 * max(1, jobs):
                break
        while futures:
            finished, futures = wait(futures, return_when=FIRST_COMPLETED)
            for fut in finished:
                rec = fut.result()
                done[rec.key] = rec
                if handle:
                    handle.write((json.dumps(rec.to_dict(), sort_keys=True) + "\n").encode())
                    handle.flush()
                nxt = next(queue, None)
                if nxt is not None:
                    futures.add(pool.submit(work, *nxt))
    finally:
        pool.shutdown(wait=True, cancel_futures=True)
        if handle:
            handle.close()
    return [done[model.model_id, qa.key, c.name] for qa, c in tasks]
