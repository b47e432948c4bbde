"""Stage 1: per-frame segment statistics and their on-disk cache."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..color_space import decode_srgb_to_linear, read_png
from ..errors import AssetError, StructuralError
from .tables import QATables

STATS_VERSION = 1


@dataclass
class FrameBundle:
    """RGB (uint8), depth (meters, 0 = invalid), semantic class ids and over-segmentation ids."""

    rgb: np.ndarray
    depth: np.ndarray
    semantic: np.ndarray
    overseg: np.ndarray
    scene: str = ""
    frame: str = ""

    def __post_init__(self) -> None:
        shape = self.rgb.shape[:2]
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise StructuralError(f"rgb must be (H, W, 3), got {self.rgb.shape}")
        for name in ("depth", "semantic", "overseg"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise StructuralError(f"{name} raster is {arr.shape}, rgb is {shape}")


def _read_raster(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im)
    except Exception as exc:
        raise AssetError(f"cannot decode {path}: {exc}") from exc


def load_frame_bundle(record) -> FrameBundle:
    """Load a manifest record: 8-bit RGB, 16-bit depth in millimeters, 16-bit id maps."""
    for key in ("depth", "semantic", "overseg"):
        if getattr(record, key) is None:
            raise StructuralError(f"{record.scene}/{record.frame}: manifest entry lacks {key!r}")
    try:
        rgb = read_png(record.rgb)
    except Exception as exc:
        raise AssetError(f"{record.scene}/{record.frame}: cannot decode {record.rgb}: {exc}") from exc
    depth = _read_raster(record.depth).astype(np.float64) / 1000.0
    semantic = _read_raster(record.semantic).astype(np.int64)
    overseg = _read_raster(record.overseg).astype(np.int64)
    return FrameBundle(rgb, depth, semantic, overseg, record.scene, record.frame)


def save_frame_bundle(bundle: FrameBundle, directory: str | Path) -> dict[str, Path]:
    """Write a bundle as PNGs (inverse of ``load_frame_bundle``); returns the asset paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {k: directory / f"{k}.png" for k in ("rgb", "depth", "semantic", "overseg")}
    Image.fromarray(np.ascontiguousarray(bundle.rgb.astype(np.uint8))).save(paths["rgb"])
    depth_mm = np.clip(np.round(bundle.depth * 1000.0), 0, 65535).astype(np.uint16)
    for key, arr in (("depth", depth_mm), ("semantic", bundle.semantic), ("overseg", bundle.overseg)):
        arr = np.asarray(arr)
        if arr.min() < 0 or arr.max() > 65535:
            raise StructuralError(f"{key} values do not fit in 16 bits")
        Image.fromarray(np.ascontiguousarray(arr.astype(np.uint16))).save(paths[key])
    return paths


@dataclass
class SegmentAttributes:
    segment_id: int
    class_label: str
    mean_color: tuple[float, float, float]  # linear RGB
    depth_median: float | None  # meters; None when too few valid pixels
    depth_valid_fraction: float
    area_px: int
    area_fraction: float
    bbox: tuple[int, int, int, int]  # x_min, y_min, x_max, y_max (inclusive)


@dataclass
class FrameStatistics:
    segments: list[SegmentAttributes]
    room_type: str | None = None
    viable_families: list[int] = field(default_factory=list)
    scene: str = ""
    frame: str = ""
    width: int = 0
    height: int = 0

    def to_dict(self) -> dict:
        return {
            "version": STATS_VERSION,
            "scene": self.scene,
            "frame": self.frame,
            "width": self.width,
            "height": self.height,
            "segments": [asdict(s) for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FrameStatistics":
        if data.get("version") != STATS_VERSION:
            raise StructuralError(f"stats cache version {data.get('version')} != {STATS_VERSION}")
        segments = [
            SegmentAttributes(
                segment_id=int(s["segment_id"]),
                class_label=s["class_label"],
                mean_color=tuple(s["mean_color"]),
                depth_median=s["depth_median"],
                depth_valid_fraction=float(s["depth_valid_fraction"]),
                area_px=int(s["area_px"]),
                area_fraction=float(s["area_fraction"]),
                bbox=tuple(s["bbox"]),
            )
            for s in data["segments"]
        ]
        return cls(segments, scene=data["scene"], frame=data["frame"], width=data["width"], height=data["height"])


def extract_segment_stats(
    frame: FrameBundle, tables: QATables, min_valid_depth_fraction: float = 0.5
) -> FrameStatistics:
    """One ``SegmentAttributes`` per over-segment (id > 0) whose majority class is known and not void.

    Segments are ordered by id. The class is the most frequent semantic id
    inside the segment (ties go to the smaller id).
    """
    h, w = frame.overseg.shape
    stats = FrameStatistics([], scene=frame.scene, frame=frame.frame, width=w, height=h)
    labels = frame.overseg.ravel()
    inside = labels > 0
    if not inside.any():
        return stats

    seg_ids, inverse = np.unique(labels[inside], return_inverse=True)
    n = len(seg_ids)
    pix = np.flatnonzero(inside)
    sem = frame.semantic.ravel()[pix]
    area = np.bincount(inverse, minlength=n)

    # majority class per segment: sort by (segment, -count, class)
    pairs, counts = np.unique(np.stack([inverse, sem]), axis=1, return_counts=True)
    order = np.lexsort((pairs[1], -counts, pairs[0]))
    first = np.ones(len(order), dtype=bool)
    first[1:] = pairs[0][order][1:] != pairs[0][order][:-1]
    majority = np.empty(n, dtype=np.int64)
    majority[pairs[0][order][first]] = pairs[1][order][first]

    linear = decode_srgb_to_linear(frame.rgb).reshape(-1, 3)[pix]
    color_sums = np.stack([np.bincount(inverse, weights=linear[:, c], minlength=n) for c in range(3)], axis=1)

    ys, xs = np.divmod(pix, w)
    by_seg = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(area)[:-1]])
    x_min = np.minimum.reduceat(xs[by_seg], starts)
    x_max = np.maximum.reduceat(xs[by_seg], starts)
    y_min = np.minimum.reduceat(ys[by_seg], starts)
    y_max = np.maximum.reduceat(ys[by_seg], starts)
    depth_sorted = frame.depth.ravel()[pix][by_seg]

    total = float(h * w)
    for i, seg_id in enumerate(seg_ids):
        name = tables.class_names.get(int(majority[i]))
        if name is None or name == "void":
            continue
        d = depth_sorted[starts[i] : starts[i] + area[i]]
        valid = d[np.isfinite(d) & (d > 0)]
        valid_fraction = len(valid) / float(area[i])
        median = float(np.median(valid)) if len(valid) and valid_fraction >= min_valid_depth_fraction else None
        stats.segments.append(
            SegmentAttributes(
                segment_id=int(seg_id),
                class_label=name,
                mean_color=tuple(float(v) for v in color_sums[i] / area[i]),
                depth_median=median,
                depth_valid_fraction=valid_fraction,
                area_px=int(area[i]),
                area_fraction=area[i] / total,
                bbox=(int(x_min[i]), int(y_min[i]), int(x_max[i]), int(y_max[i])),
            )
        )
    return stats


def stats_cache_path(cache_dir: str | Path, scene: str, frame: str) -> Path:
    return Path(cache_dir) / scene / f"{frame}.stats.json"


def write_stats(stats: FrameStatistics, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(stats.to_dict(), sort_keys=True) + "\n")


def read_stats(path: str | Path) -> FrameStatistics:
    return FrameStatistics.from_dict(json.loads(Path(path).read_text()))
