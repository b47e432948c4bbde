"""sRGB -> camera-linear RGGB mosaic, and sampling of the camera/noise parameters.

``unprocess`` runs five steps in order: inverse smoothstep tone mapping,
gamma expansion, RGB -> camera color correction, inversion of the white
balance and brightness gains with highlight preservation, and RGGB mosaic
extraction at half resolution.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .color_space import EPSILON, GAMMA, to_unit
from .errors import ConfigError, DimensionError
from .raw_noise import NoiseParams, SensorProfile, load_profile, noise_params_for_gain
from .seeding import make_rng

# linear sRGB (D65) -> CIE XYZ
RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

# level index -> quantile of the K (log-space) and r ranges in ladder-coupled mode
LADDER_QUANTILES = {1: 0.1, 2: 0.3, 3: 0.5, 4: 0.7, 5: 0.9}

Matrix3 = tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]


def _as_matrix3(m: np.ndarray) -> Matrix3:
    return tuple(tuple(float(v) for v in row) for row in np.asarray(m))  # type: ignore[return-value]


@dataclass(frozen=True)
class CameraParams:
    ccm_rgb_to_cam: Matrix3
    ccm_cam_to_rgb: Matrix3
    wb_gain_red: float
    wb_gain_blue: float
    brightness_gain: float
    white_level: int = 16383
    seed_tag: str = ""

    def __post_init__(self) -> None:
        if min(self.wb_gain_red, self.wb_gain_blue, self.brightness_gain) <= 0:
            raise ConfigError("white-balance and brightness gains must be positive")
        if self.white_level <= 0:
            raise ConfigError("white_level must be positive")

    @property
    def rgb_to_cam(self) -> np.ndarray:
        return np.array(self.ccm_rgb_to_cam)

    @property
    def cam_to_rgb(self) -> np.ndarray:
        return np.array(self.ccm_cam_to_rgb)

    def plane_gains(self) -> np.ndarray:
        """Forward gains per RGGB plane (white balance times brightness)."""
        b = self.brightness_gain
        return np.array([self.wb_gain_red * b, b, b, self.wb_gain_blue * b])

    @classmethod
    def identity(cls, white_level: int = 16383) -> "CameraParams":
        eye = _as_matrix3(np.eye(3))
        return cls(eye, eye, 1.0, 1.0, 1.0, white_level, "identity")

    @classmethod
    def from_rgb_to_cam(cls, rgb_to_cam: np.ndarray, **kwargs) -> "CameraParams":
        rgb_to_cam = np.asarray(rgb_to_cam, dtype=np.float64)
        return cls(_as_matrix3(rgb_to_cam), _as_matrix3(np.linalg.inv(rgb_to_cam)), **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_range(name: str, lo: float, hi: float) -> None:
    if lo > hi:
        raise ConfigError(f"{name} range is inverted: min {lo} > max {hi}")


@dataclass(frozen=True)
class SamplingConfig:
    """Ranges for the per-image ISP and noise parameter draws.

    The K and r ranges are the physically motivated defaults; the color
    matrix bank and gain ranges follow common unprocessing practice and
    are implementation defaults.
    """

    k_range: tuple[float, float] = (0.1, 6.0)
    iso_ratio_range: tuple[float, float] = (100.0, 300.0)
    red_gain_range: tuple[float, float] = (1.9, 2.4)
    blue_gain_range: tuple[float, float] = (1.5, 1.9)
    # brightness gain = 1 / clip(N(mean, std), clip_lo, clip_hi)
    brightness_mean: float = 0.8
    brightness_std: float = 0.1
    brightness_clip: tuple[float, float] = (0.5, 1.1)
    ccm_bank: str | None = None
    inverse_tone_map: bool = True
    white_level: int | None = None  # None -> take it from the sensor profile

    def __post_init__(self) -> None:
        _check_range("k_range", *self.k_range)
        _check_range("iso_ratio_range", *self.iso_ratio_range)
        _check_range("red_gain_range", *self.red_gain_range)
        _check_range("blue_gain_range", *self.blue_gain_range)
        _check_range("brightness_clip", *self.brightness_clip)
        if self.k_range[0] <= 0 or self.iso_ratio_range[0] <= 0:
            raise ConfigError("K and r ranges must be strictly positive")
        if self.red_gain_range[0] <= 0 or self.blue_gain_range[0] <= 0 or self.brightness_clip[0] <= 0:
            raise ConfigError("gain ranges must be strictly positive")
        if self.brightness_std < 0:
            raise ConfigError("brightness_std must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown sampling keys {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kwargs)


@functools.lru_cache(maxsize=8)
def load_ccm_bank(path: str | Path | None = None) -> np.ndarray:
    """Load XYZ -> camera matrices, shape ``(n, 3, 3)``. The result is cached; do not mutate it."""
    if path is None:
        text = resources.files("lowlight_eqa").joinpath("data/ccm_bank.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        values = [float(v) for v in line.replace(",", " ").split()]
        if len(values) != 9:
            raise ConfigError(f"ccm bank line {lineno}: expected 9 values, got {len(values)}")
        rows.append(values)
    if not rows:
        raise ConfigError("ccm bank is empty")
    return np.array(rows).reshape(-1, 3, 3)


def rgb_to_cam_from_bank(bank: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Convex combination of XYZ->cam matrices, mapped to RGB->cam, rows normalized to 1."""
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    xyz_to_cam = np.tensordot(weights, bank, axes=1)
    rgb_to_cam = xyz_to_cam @ RGB_TO_XYZ
    return rgb_to_cam / rgb_to_cam.sum(axis=-1, keepdims=True)


def sample_camera_params(
    seed: int,
    config: SamplingConfig | None = None,
    profile: SensorProfile | None = None,
    level_index: int | None = None,
    ladder_coupled: bool = False,
) -> tuple[CameraParams, NoiseParams]:
    """Draw one (CameraParams, NoiseParams) pair from ``seed``.

    K is log-uniform over ``k_range`` and r uniform over ``iso_ratio_range``,
    unless ``ladder_coupled`` is set and ``level_index`` is 1..5: then both
    sit at the fixed quantile of their range for that level. The draw order
    never changes, so the remaining parameters are identical between modes.
    """
    config = config or SamplingConfig()
    profile = profile or load_profile()
    bank = load_ccm_bank(config.ccm_bank)
    rng = make_rng(seed)

    weights = rng.uniform(1e-8, 1.0, size=len(bank))
    red = rng.uniform(*config.red_gain_range)
    blue = rng.uniform(*config.blue_gain_range)
    inv_brightness = np.clip(rng.normal(config.brightness_mean, config.brightness_std), *config.brightness_clip)
    log_k_lo, log_k_hi = math.log(config.k_range[0]), math.log(config.k_range[1])
    log_k = rng.uniform(log_k_lo, log_k_hi)
    r = rng.uniform(*config.iso_ratio_range)
    read_residual = rng.normal(0.0, profile.read_residual_sigma)
    row_residual = rng.normal(0.0, profile.row_residual_sigma)

    if ladder_coupled and level_index:
        if level_index not in LADDER_QUANTILES:
            raise ConfigError(f"no ladder quantile for level index {level_index}")
        q = LADDER_QUANTILES[level_index]
        log_k = log_k_lo + q * (log_k_hi - log_k_lo)
        r = config.iso_ratio_range[0] + q * (config.iso_ratio_range[1] - config.iso_ratio_range[0])

    # guard the exp/log round trip against leaving the closed range
    k = min(max(math.exp(log_k), config.k_range[0]), config.k_range[1])
    camera = CameraParams.from_rgb_to_cam(
        rgb_to_cam_from_bank(bank, weights),
        wb_gain_red=float(red),
        wb_gain_blue=float(blue),
        brightness_gain=float(1.0 / inv_brightness),
        white_level=config.white_level or profile.white_level,
        seed_tag=f"{seed:016x}",
    )
    noise = noise_params_for_gain(profile, k, float(r), float(read_residual), float(row_residual))
    return camera, noise


def inverse_smoothstep(x: np.ndarray) -> np.ndarray:
    """Invert the global tone curve 3x^2 - 2x^3."""
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - np.sin(np.arcsin(1.0 - 2.0 * x) / 3.0)


def smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return 3.0 * x**2 - 2.0 * x**3


def gamma_expansion(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, EPSILON) ** GAMMA


def apply_ccm(img: np.ndarray, ccm: np.ndarray) -> np.ndarray:
    """Apply a 3x3 color matrix to every pixel of an (H, W, 3) image."""
    return img @ np.asarray(ccm, dtype=np.float64).T


def highlight_mask(gray: np.ndarray, inflection: float = 0.9) -> np.ndarray:
    """Blend weight toward unit gain: 0 below ``inflection``, rising quadratically to 1 at gray = 1."""
    return (np.maximum(gray - inflection, 0.0) / (1.0 - inflection)) ** 2


HighlightCurve = Callable[[np.ndarray], np.ndarray]


def safe_invert_gains(img: np.ndarray, camera: CameraParams, curve: HighlightCurve = highlight_mask) -> np.ndarray:
    """Divide out white balance and brightness, easing the inverse gain toward 1 in highlights."""
    gains = np.array([1.0 / camera.wb_gain_red, 1.0, 1.0 / camera.wb_gain_blue]) / camera.brightness_gain
    gray = img.mean(axis=-1, keepdims=True)
    mask = curve(gray)
    safe = np.maximum(mask + (1.0 - mask) * gains, gains)
    return img * safe


def mosaic(img: np.ndarray) -> np.ndarray:
    """Extract RGGB planes: (H, W, 3) -> (H/2, W/2, 4) ordered R, G1, G2, B."""
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        raise DimensionError(f"mosaic needs even height and width, got {h}x{w}")
    return np.stack(
        [img[0::2, 0::2, 0], img[0::2, 1::2, 1], img[1::2, 0::2, 1], img[1::2, 1::2, 2]],
        axis=-1,
    )


def cfa_from_planes(planes: np.ndarray) -> np.ndarray:
    """Interleave RGGB planes back into a full-resolution (H, W) color filter array."""
    h, w = planes.shape[:2]
    cfa = np.empty((2 * h, 2 * w), dtype=planes.dtype)
    cfa[0::2, 0::2] = planes[..., 0]
    cfa[0::2, 1::2] = planes[..., 1]
    cfa[1::2, 0::2] = planes[..., 2]
    cfa[1::2, 1::2] = planes[..., 3]
    return cfa


def unprocess_to_linear(
    img: np.ndarray,
    camera: CameraParams,
    inverse_tone_map: bool = True,
    curve: HighlightCurve = highlight_mask,
) -> np.ndarray:
    """Tone, gamma, color and gain inversion: full-resolution camera-linear RGB, clamped to [0, 1]."""
    x = to_unit(img)
    if x.ndim != 3 or x.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) image, got shape {x.shape}")
    if x.shape[0] % 2 or x.shape[1] % 2:
        raise DimensionError(f"unprocessing needs even height and width, got {x.shape[0]}x{x.shape[1]}")
    if inverse_tone_map:
        x = inverse_smoothstep(x)
    x = gamma_expansion(x)
    x = apply_ccm(x, camera.rgb_to_cam)
    x = safe_invert_gains(x, camera, curve)
    # CCM rows can carry negative weights and saturated pixels can exceed 1
    return np.clip(x, 0.0, 1.0)


def unprocess(
    img: np.ndarray,
    camera: CameraParams,
    inverse_tone_map: bool = True,
    curve: HighlightCurve = highlight_mask,
) -> np.ndarray:
    """sRGB image (uint8 or float in [0, 1]) -> normalized RGGB mosaic ``(H/2, W/2, 4)``."""
    return mosaic(unprocess_to_linear(img, camera, inverse_tone_map, curve))
