"""Paired low-light variants over the L0-L5 ladder, for single images and whole manifests.

Output layout (joined on by the QA and evaluation stages)::

    {out_dir}/{scene}/{frame}/{level}/noise_free.png   # EV drop only
    {out_dir}/{scene}/{frame}/{level}/noisy.png        # RAW noise + EV drop
    {out_dir}/{scene}/{frame}/{level}/{variant}.json   # provenance sidecar
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .color_space import evdrop_srgb, read_png, write_png
from .errors import AssetError, ConfigError, StructuralError
from .isp_renderer import render
from .raw_noise import COMPONENTS, SensorProfile, inject_noise, load_profile
from .seeding import derive_seed, make_rng
from .unprocessor import SamplingConfig, sample_camera_params, unprocess

log = logging.getLogger(__name__)

LEVEL_EV = {"L0": 0.0, "L1": 2.0, "L2": 4.0, "L3": 6.0, "L4": 7.5, "L5": 9.0}
LEVELS = tuple(LEVEL_EV)
VARIANTS = ("noise_free", "noisy")
SIDECAR_VERSION = 1


def parse_level(level: str | int) -> str:
    """Normalize ``3``, ``"3"``, ``"l3"`` or ``"L3"`` to ``"L3"``."""
    name = f"L{level}" if isinstance(level, int) else str(level).strip().upper()
    if not name.startswith("L"):
        name = "L" + name
    if name not in LEVEL_EV:
        raise ConfigError(f"unknown degradation level {level!r}; expected one of {', '.join(LEVELS)}")
    return name


def parse_levels(spec: str | Iterable[str | int]) -> list[str]:
    """Parse ``"L1,L5"``, ``"L1..L5"`` or ``"L1-L3,L5"`` into sorted level names."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out: set[str] = set()
    for item in items:
        if isinstance(item, str) and (".." in item or "-" in item):
            lo, hi = item.replace("..", "-").split("-", 1)
            a, b = LEVELS.index(parse_level(lo)), LEVELS.index(parse_level(hi))
            if a > b:
                raise ConfigError(f"level range {item!r} is inverted")
            out.update(LEVELS[a : b + 1])
        elif str(item).strip():
            out.add(parse_level(item))
    if not out:
        raise ConfigError("no degradation levels selected")
    return sorted(out, key=LEVELS.index)


def level_to_ev(level: str | int) -> float:
    return LEVEL_EV[parse_level(level)]


def level_index(level: str | int) -> int:
    return LEVELS.index(parse_level(level))


def pair_seed(global_seed: int, scene: str, frame: str, level: str | int) -> int:
    return derive_seed(global_seed, str(scene), str(frame), level_index(level))


@dataclass(frozen=True)
class SynthesisOptions:
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    profile: SensorProfile | None = None
    ladder_coupled: bool = False
    components: tuple[str, ...] = COMPONENTS


@dataclass
class PairResult:
    noise_free: np.ndarray  # float sRGB in [0, 1]
    noisy: np.ndarray  # uint8 sRGB
    provenance: dict


def _split_image_id(image_id: str | tuple[str, str]) -> tuple[str, str]:
    if isinstance(image_id, tuple):
        return str(image_id[0]), str(image_id[1])
    scene, _, frame = str(image_id).partition("/")
    return scene, frame


def synthesize_pair(
    img: np.ndarray,
    level: str | int,
    global_seed: int,
    image_id: str | tuple[str, str],
    options: SynthesisOptions | None = None,
) -> PairResult:
    """Produce the noise-free and noisy low-light variants of one image at one level.

    ``image_id`` is ``(scene, frame)`` or ``"scene/frame"``. At L0 both
    variants are copies of the input.
    """
    options = options or SynthesisOptions()
    level = parse_level(level)
    delta_ev = LEVEL_EV[level]
    scene, frame = _split_image_id(image_id)
    seed = pair_seed(global_seed, scene, frame, level)
    profile = options.profile or load_profile()
    provenance = {
        "version": SIDECAR_VERSION,
        "scene": scene,
        "frame": frame,
        "level": level,
        "delta_ev": delta_ev,
        "global_seed": int(global_seed),
        "seed": seed,
        "profile": profile.name,
        "ladder_coupled": options.ladder_coupled,
    }
    img = np.asarray(img)
    if level == "L0":
        return PairResult(img.copy(), img.copy(), provenance)

    noise_free = evdrop_srgb(img, delta_ev)
    camera, noise = sample_camera_params(
        seed,
        options.sampling,
        profile,
        level_index=LEVELS.index(level),
        ladder_coupled=options.ladder_coupled,
    )
    raw = unprocess(img, camera, inverse_tone_map=options.sampling.inverse_tone_map)
    noisy_raw = inject_noise(raw, camera, noise, make_rng(derive_seed(seed, "noise")), options.components)
    noisy = render(noisy_raw, camera, delta_ev)
    provenance["camera"] = camera.to_dict()
    provenance["noise"] = noise.to_dict()
    provenance["noise_components"] = list(options.components)
    return PairResult(noise_free, noisy, provenance)


@dataclass(frozen=True)
class FrameRecord:
    scene: str
    frame: str
    rgb: Path
    depth: Path | None = None
    semantic: Path | None = None
    overseg: Path | None = None

    @property
    def key(self) -> tuple[str, str]:
        return self.scene, self.frame


@dataclass
class DatasetManifest:
    frames: list[FrameRecord]

    @property
    def scenes(self) -> list[str]:
        return sorted({f.scene for f in self.frames})

    def frames_in(self, scene: str) -> list[FrameRecord]:
        return [f for f in self.frames if f.scene == scene]

    def __len__(self) -> int:
        return len(self.frames)


_ASSET_KEYS = ("rgb", "depth", "semantic", "overseg")


def load_manifest(path: str | Path, require: Sequence[str] = ("rgb",)) -> DatasetManifest:
    """Read a JSON Lines manifest: one ``{"scene", "frame", "rgb", ...}`` object per line.

    Relative asset paths resolve against the manifest's directory. Every
    referenced path must exist, every key in ``require`` must be present, and
    frame ids must be unique within a scene.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise AssetError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    frames: list[FrameRecord] = []
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "scene" not in entry or "frame" not in entry:
            raise StructuralError(f"{path}:{lineno}: entry needs 'scene' and 'frame'")
        scene, frame = str(entry["scene"]), str(entry["frame"])
        if (scene, frame) in seen:
            raise StructuralError(f"{path}:{lineno}: duplicate frame {frame!r} in scene {scene!r}")
        seen.add((scene, frame))
        assets: dict[str, Path | None] = {}
        for key in _ASSET_KEYS:
            value = entry.get(key)
            if value is None:
                if key in require:
                    raise StructuralError(f"{path}:{lineno}: missing required asset {key!r}")
                assets[key] = None
                continue
            p = Path(value)
            p = p if p.is_absolute() else base / p
            if not p.exists():
                raise StructuralError(f"{path}:{lineno}: asset {key} not found: {p}")
            assets[key] = p
        frames.append(FrameRecord(scene, frame, **assets))
    return DatasetManifest(frames)


def write_manifest(path: str | Path, frames: Iterable[FrameRecord]) -> None:
    """Write a manifest with asset paths relative to its directory when possible."""
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for f in frames:
        entry: dict[str, str] = {"scene": f.scene, "frame": f.frame}
        for key in _ASSET_KEYS:
            value = getattr(f, key)
            if value is not None:
                value = Path(value).resolve()
                try:
                    entry[key] = str(value.relative_to(base))
                except ValueError:
                    entry[key] = str(value)
        lines.append(json.dumps(entry, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")


def expected_image_count(n_frames: int, levels: Iterable[str]) -> int:
    return n_frames * len(list(levels)) * len(VARIANTS)


def variant_path(root: str | Path, scene: str, frame: str, level: str, variant: str) -> Path:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    return Path(root) / scene / frame / parse_level(level) / f"{variant}.png"


@dataclass
class RunReport:
    frames: int = 0
    images_written: int = 0
    failures: list[dict] = field(default_factory=list)
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "images_written": self.images_written,
            "failures": self.failures,
            "wall_time_s": round(self.wall_time_s, 3),
        }


def _process_frame(
    record: FrameRecord, levels: list[str], out_dir: Path, global_seed: int, options: SynthesisOptions
) -> tuple[int, dict | None]:
    written = 0
    try:
        try:
            img = read_png(record.rgb)
        except Exception as exc:
            raise AssetError(f"{record.scene}/{record.frame}: cannot decode {record.rgb}: {exc}") from exc
        for level in levels:
            pair = synthesize_pair(img, level, global_seed, record.key, options)
            for variant, data in (("noise_free", pair.noise_free), ("noisy", pair.noisy)):
                png = variant_path(out_dir, record.scene, record.frame, level, variant)
                write_png(png, data)
                sidecar = dict(pair.provenance, variant=variant, source=record.rgb.name)
                png.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
                written += 1
    except Exception as exc:  # one bad frame must not stop the run
        log.warning("frame %s/%s failed: %s", record.scene, record.frame, exc)
        return written, {"scene": record.scene, "frame": record.frame, "error": f"{type(exc).__name__}: {exc}"}
    return written, None


def _check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / f".write-probe-{os.getpid()}"
    probe.write_bytes(b"")
    probe.unlink()


def process_dataset(
    manifest: DatasetManifest,
    levels: Iterable[str | int],
    out_dir: str | Path,
    global_seed: int,
    options: SynthesisOptions | None = None,
    jobs: int = 1,
) -> RunReport:
    """Write both variants for every (frame, level). Failing frames are recorded, not fatal.

    Raises ``OSError`` when ``out_dir`` cannot be written.
    """
    options = options or SynthesisOptions()
    if options.profile is None:
        options = SynthesisOptions(options.sampling, load_profile(), options.ladder_coupled, options.components)
    levels = parse_levels(list(levels))
    out_dir = Path(out_dir)
    _check_writable(out_dir)

    start = time.perf_counter()
    report = RunReport(frames=len(manifest))
    args = [(rec, levels, out_dir, int(global_seed), options) for rec in manifest.frames]
    if jobs <= 1:
        results = [_process_frame(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process_frame, *zip(*args)))
    for written, failure in results:
        report.images_written += written
        if failure:
            report.failures.append(failure)
    report.wall_time_s = time.perf_counter() - start
    return report
