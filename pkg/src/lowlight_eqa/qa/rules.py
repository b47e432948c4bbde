"""Stage 2: room classification, family survey and the five question rules.

Each family has a *decision* function that inspects ``FrameStatistics`` and
returns either ``None`` (preconditions fail) or everything needed to phrase
the question. The survey, the generator and the self-verification pass all
go through the same decision functions, so a family is surveyed as viable
exactly when its rule emits a question.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..seeding import derive_seed, stable_choice, stable_shuffle, stable_uniform
from .frames import FrameBundle, FrameStatistics, SegmentAttributes, extract_segment_stats
from .tables import QATables

UNKNOWN_ROOM = "unknown"
RULE_VERSION = "v1"
FAMILIES = {
    1: "room_type",
    2: "room_affordance",
    3: "object_recognition",
    4: "object_attribute_color",
    5: "closest_object",
}
FAMILY_IDS = {name: k for k, name in FAMILIES.items()}
YES_NO = ("Yes", "No")


@dataclass(frozen=True)
class QAConfig:
    global_seed: int = 0
    depth_gap_m: float = 0.5
    min_area_fraction: float = 0.005
    min_valid_depth_fraction: float = 0.5
    color_ambiguity_ratio: float = 1.1
    color_choices: int = 4
    max_choices: int = 6

    def thresholds(self) -> dict:
        d = asdict(self)
        d.pop("global_seed")
        return d


@dataclass
class QAPair:
    scene: str
    frame: str
    family: str
    question: str
    choices: list[str]
    answer_index: int
    trace: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 2 <= len(self.choices) <= 6:
            raise ValueError(f"need 2-6 choices, got {len(self.choices)}")
        if len(set(self.choices)) != len(self.choices):
            raise ValueError(f"duplicate choices {self.choices}")
        if not 0 <= self.answer_index < len(self.choices):
            raise ValueError(f"answer_index {self.answer_index} out of range")

    @property
    def answer(self) -> str:
        return self.choices[self.answer_index]

    @property
    def key(self) -> str:
        return f"{self.scene}/{self.frame}/{self.family}"

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "frame": self.frame,
            "family": self.family,
            "question": self.question,
            "choices": list(self.choices),
            "answer_index": self.answer_index,
            "trace": self.trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "QAPair":
        return cls(d["scene"], d["frame"], d["family"], d["question"], list(d["choices"]), int(d["answer_index"]), d.get("trace", {}))


def classify_room(stats: FrameStatistics, tables: QATables) -> str:
    """Sum rule-table weights over the classes present; highest wins, ties by priority order."""
    present = {s.class_label for s in stats.segments}
    best, best_score = UNKNOWN_ROOM, 0.0
    for room in tables.room_priority:
        score = sum(w for cls, w in tables.room_rules.get(room, {}).items() if cls in present)
        if score > best_score:
            best, best_score = room, score
    return best


def _is_object(seg: SegmentAttributes, tables: QATables) -> bool:
    return seg.class_label not in tables.structural


def _large(seg: SegmentAttributes, config: QAConfig) -> bool:
    return seg.area_fraction >= config.min_area_fraction


def closest_candidates(stats: FrameStatistics, tables: QATables, config: QAConfig) -> list[SegmentAttributes]:
    """Objects eligible for the closest-object rule, nearest first."""
    valid = [
        s
        for s in stats.segments
        if _is_object(s, tables)
        and s.class_label not in tables.flat_classes
        and _large(s, config)
        and s.depth_median is not None
    ]
    return sorted(valid, key=lambda s: (s.depth_median, s.segment_id))


def color_name(linear_rgb, tables: QATables) -> tuple[str, str, float, float]:
    """Nearest and runner-up palette names by Euclidean distance in linear RGB."""
    names, palette = tables.palette_linear()
    dist = np.linalg.norm(palette - np.asarray(linear_rgb, dtype=np.float64), axis=1)
    order = np.argsort(dist, kind="stable")
    return names[order[0]], names[order[1]], float(dist[order[0]]), float(dist[order[1]])


# --- decisions ---------------------------------------------------------------


def _decide_room_type(stats, room, tables, config, seed):
    if room == UNKNOWN_ROOM:
        return None
    return {"question": "What type of room is shown in the image?", "answer": room, "choices": tables.rooms}


def _decide_affordance(stats, room, tables, config, seed):
    if room == UNKNOWN_ROOM or not tables.affordances.get(room):
        return None
    own = sorted(tables.affordances[room])
    others = sorted({a for r, acts in tables.affordances.items() if r != room for a in acts} - set(own))
    positive = not others or stable_uniform(seed, "polarity") < 0.5
    activity = stable_choice(own if positive else others, seed, "activity")
    return {
        "question": f"Would this room be a good place to {activity}?",
        "answer": "Yes" if positive else "No",
        "choices": list(YES_NO),
        "activity": activity,
    }


def _decide_recognition(stats, room, tables, config, seed):
    present_large = sorted({s.class_label for s in stats.segments if _is_object(s, tables) and _large(s, config)})
    if not present_large:
        return None
    present_any = {s.class_label for s in stats.segments}
    absent = [c for c in tables.object_classes if c not in present_any]
    positive = not absent or stable_uniform(seed, "polarity") < 0.5
    cls = stable_choice(present_large if positive else absent, seed, "class")
    return {
        "question": f"Does the image contain a {cls}?",
        "answer": "Yes" if positive else "No",
        "choices": list(YES_NO),
        "class": cls,
    }


def _decide_color(stats, room, tables, config, seed):
    counts: dict[str, int] = {}
    for s in stats.segments:
        counts[s.class_label] = counts.get(s.class_label, 0) + 1
    candidates = []
    for s in stats.segments:
        if not _is_object(s, tables) or counts[s.class_label] != 1 or not _large(s, config):
            continue
        best, runner_up, d1, d2 = color_name(s.mean_color, tables)
        if d2 <= config.color_ambiguity_ratio * d1:
            continue
        candidates.append((s.class_label, best, runner_up, d1, d2))
    if not candidates:
        return None
    cls, best, runner_up, d1, d2 = stable_choice(sorted(candidates), seed, "instance")
    pool = [n for n in tables.palette if n not in (best, runner_up)]
    distractors = stable_shuffle(pool, seed, "distractors")[: config.color_choices - 1]
    return {
        "question": f"What is the color of the {cls} in the image?",
        "answer": best,
        "choices": [best, *distractors],
        "class": cls,
        "distances": [round(d1, 6), round(d2, 6)],
    }


def _decide_closest(stats, room, tables, config, seed):
    valid = closest_candidates(stats, tables, config)
    if len(valid) < 2:
        return None
    gap = valid[1].depth_median - valid[0].depth_median
    if gap < config.depth_gap_m:
        return None
    answer = valid[0].class_label
    others: list[str] = []
    for s in valid[1:]:
        if s.class_label != answer and s.class_label not in others:
            others.append(s.class_label)
    if not others:
        return None
    return {
        "question": "Which of these objects is closest to the camera?",
        "answer": answer,
        "choices": [answer, *others[: config.max_choices - 1]],
        "depths": [valid[0].depth_median, valid[1].depth_median],
    }


_DECISIONS = {
    1: _decide_room_type,
    2: _decide_affordance,
    3: _decide_recognition,
    4: _decide_color,
    5: _decide_closest,
}


def qa_seed(config: QAConfig, scene: str, frame: str, family: int) -> int:
    return derive_seed(config.global_seed, scene, frame, FAMILIES[family])


def decide(family: int, stats: FrameStatistics, room: str, tables: QATables, config: QAConfig) -> dict | None:
    seed = qa_seed(config, stats.scene, stats.frame, family)
    return _DECISIONS[family](stats, room, tables, config, seed)


def survey_viable_families(stats: FrameStatistics, room: str, tables: QATables, config: QAConfig) -> list[int]:
    return [k for k in FAMILIES if decide(k, stats, room, tables, config) is not None]


def _build(family: int, stats: FrameStatistics, decision: dict, config: QAConfig) -> QAPair:
    seed = qa_seed(config, stats.scene, stats.frame, family)
    choices = stable_shuffle(decision["choices"], seed, "choice-order")
    extra = {k: v for k, v in decision.items() if k not in ("question", "answer", "choices")}
    trace = {"rule": f"{FAMILIES[family]}/{RULE_VERSION}", "thresholds": config.thresholds(), **extra}
    return QAPair(
        scene=stats.scene,
        frame=stats.frame,
        family=FAMILIES[family],
        question=decision["question"],
        choices=choices,
        answer_index=choices.index(decision["answer"]),
        trace=trace,
    )


def generate_from_stats(stats: FrameStatistics, tables: QATables, config: QAConfig) -> list[QAPair]:
    """Classify, survey and apply every viable rule. Fills ``room_type``/``viable_families`` on ``stats``."""
    room = classify_room(stats, tables)
    stats.room_type = room
    stats.viable_families = []
    pairs = []
    for k in FAMILIES:
        decision = decide(k, stats, room, tables, config)
        if decision is None:
            continue
        stats.viable_families.append(k)
        pairs.append(_build(k, stats, decision, config))
    for qa in pairs:
        if not verify_qa(qa, stats, tables, config):
            raise AssertionError(f"self-verification failed for {qa.key}")
    return pairs


def generate_qa(frame: FrameBundle, tables: QATables, config: QAConfig) -> list[QAPair]:
    stats = extract_segment_stats(frame, tables, config.min_valid_depth_fraction)
    return generate_from_stats(stats, tables, config)


def verify_qa(qa: QAPair, stats: FrameStatistics, tables: QATables, config: QAConfig) -> bool:
    """Re-run the pair's rule against ``stats`` and check it yields the stored question and answer."""
    family = FAMILY_IDS.get(qa.family)
    if family is None or (qa.scene, qa.frame) != (stats.scene, stats.frame):
        return False
    decision = decide(family, stats, classify_room(stats, tables), tables, config)
    if decision is None:
        return False
    return (
        decision["question"] == qa.question
        and decision["answer"] == qa.answer
        and sorted(decision["choices"]) == sorted(qa.choices)
    )
