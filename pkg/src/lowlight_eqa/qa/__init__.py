"""Rule-based multiple-choice QA generation from annotated frames."""

from .corpus import export_review_sheet, frame_statistics, generate_corpus, read_qa_jsonl, write_qa_jsonl
from .frames import (
    FrameBundle,
    FrameStatistics,
    SegmentAttributes,
    extract_segment_stats,
    load_frame_bundle,
    save_frame_bundle,
)
from .rules import (
    FAMILIES,
    FAMILY_IDS,
    UNKNOWN_ROOM,
    QAConfig,
    QAPair,
    classify_room,
    closest_candidates,
    generate_from_stats,
    generate_qa,
    survey_viable_families,
    verify_qa,
)
from .tables import QATables, load_tables

__all__ = [
    "FAMILIES",
    "FAMILY_IDS",
    "UNKNOWN_ROOM",
    "FrameBundle",
    "FrameStatistics",
    "QAConfig",
    "QAPair",
    "QATables",
    "SegmentAttributes",
    "classify_room",
    "closest_candidates",
    "export_review_sheet",
    "extract_segment_stats",
    "frame_statistics",
    "generate_corpus",
    "generate_from_stats",
    "generate_qa",
    "load_frame_bundle",
    "load_tables",
    "read_qa_jsonl",
    "save_frame_bundle",
    "survey_viable_families",
    "verify_qa",
    "write_qa_jsonl",
]
