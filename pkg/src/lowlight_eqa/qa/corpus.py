"""Manifest-level QA generation, the Stage-1 cache, and JSONL / review-sheet I/O."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable

from ..degradation import DatasetManifest, FrameRecord
from ..errors import StructuralError
from .frames import FrameStatistics, extract_segment_stats, load_frame_bundle, read_stats, stats_cache_path, write_stats
from .rules import FAMILY_IDS, QAConfig, QAPair, generate_from_stats
from .tables import QATables

log = logging.getLogger(__name__)


def frame_statistics(
    record: FrameRecord, tables: QATables, config: QAConfig, cache_dir: str | Path | None = None
) -> FrameStatistics:
    """Stage 1 for one frame, served from ``cache_dir`` when a current-version entry exists."""
    path = stats_cache_path(cache_dir, record.scene, record.frame) if cache_dir else None
    if path is not None and path.exists():
        try:
            return read_stats(path)
        except (StructuralError, KeyError, json.JSONDecodeError) as exc:
            log.info("recomputing stale stats cache %s: %s", path, exc)
    stats = extract_segment_stats(load_frame_bundle(record), tables, config.min_valid_depth_fraction)
    if path is not None:
        write_stats(stats, path)
    return stats


def _frame_qa(record: FrameRecord, tables: QATables, config: QAConfig, cache_dir) -> list[QAPair]:
    return generate_from_stats(frame_statistics(record, tables, config, cache_dir), tables, config)


def generate_corpus(
    manifest: DatasetManifest,
    tables: QATables,
    config: QAConfig,
    cache_dir: str | Path | None = None,
    jobs: int = 1,
) -> list[QAPair]:
    """Run both stages over every frame once; output order is (scene, frame, family id)."""
    records = manifest.frames
    if jobs <= 1:
        per_frame = [_frame_qa(r, tables, config, cache_dir) for r in records]
    else:
        n = len(records)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_frame = list(pool.map(_frame_qa, records, [tables] * n, [config] * n, [cache_dir] * n))
    pairs = [qa for batch in per_frame for qa in batch]
    pairs.sort(key=lambda q: (q.scene, q.frame, FAMILY_IDS[q.family]))
    return pairs


def write_qa_jsonl(pairs: Iterable[QAPair], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [qa.to_json() for qa in pairs]
    path.write_text("".join(line + "\n" for line in lines))
    return len(lines)


def read_qa_jsonl(path: str | Path) -> list[QAPair]:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            pairs.append(QAPair.from_dict(json.loads(line)))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise StructuralError(f"{path}:{lineno}: bad QA record: {exc}") from exc
    return pairs


def export_review_sheet(pairs: Iterable[QAPair], manifest: DatasetManifest, path: str | Path) -> int:
    """CSV for human sanity checks: one row per pair with the source image path and a blank verdict column."""
    rgb = {r.key: str(r.rgb) for r in manifest.frames}
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene", "frame", "family", "question", "choices", "answer", "image", "verdict"])
        for qa in pairs:
            writer.writerow(
                [qa.scene, qa.frame, qa.family, qa.question, " | ".join(qa.choices), qa.answer, rgb.get((qa.scene, qa.frame), ""), ""]
            )
            n += 1
    return n
