"""RAW-domain sensor noise: shot, read, row and quantization components.

All component functions work on a 4-plane RGGB mosaic of shape
``(h, w, 4)`` holding ADU values, and draw from an explicit
``numpy.random.Generator``. ``inject_noise`` composes them in the fixed
order shot -> read -> row -> quant, consuming the generator in that order,
so calling the four components by hand with an identically seeded
generator reproduces it bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

COMPONENTS = ("shot", "read", "row", "quant")


@dataclass(frozen=True)
class SensorProfile:
    """Calibration coefficients for the gain-dependent noise scales."""

    name: str
    white_level: int
    tukey_lambda: float
    read_slope: float
    read_intercept: float
    read_residual_sigma: float
    row_slope: float
    row_intercept: float
    row_residual_sigma: float
    color_bias: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if self.white_level <= 0:
            raise ConfigError(f"white_level must be positive, got {self.white_level}")
        if len(self.color_bias) != 4:
            raise ConfigError("color_bias needs one value per RGGB plane")
        if self.read_residual_sigma < 0 or self.row_residual_sigma < 0:
            raise ConfigError("residual sigmas must be non-negative")
        if self.tukey_lambda <= -0.5:
            # variance of the Tukey-lambda law is infinite for lambda <= -1/2
            raise ConfigError(f"tukey_lambda must exceed -0.5, got {self.tukey_lambda}")


_PROFILE_KEYS = {f.name for f in SensorProfile.__dataclass_fields__.values()}


def load_profile(path: str | Path | None = None) -> SensorProfile:
    """Read a key-value (TOML) sensor profile; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("lowlight_eqa").joinpath("data/sensor_profile_default.toml").read_text()
    else:
        text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse sensor profile {path}: {exc}") from exc
    missing = _PROFILE_KEYS - raw.keys()
    unknown = raw.keys() - _PROFILE_KEYS
    if missing or unknown:
        raise ConfigError(f"sensor profile keys: missing {sorted(missing)}, unknown {sorted(unknown)}")
    raw["color_bias"] = tuple(float(v) for v in raw["color_bias"])
    raw["white_level"] = int(raw["white_level"])
    return SensorProfile(**raw)


@dataclass(frozen=True)
class NoiseParams:
    system_gain_k: float
    iso_ratio_r: float
    sigma_read: float
    sigma_row: float
    tukey_lambda: float
    color_bias: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    profile_name: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def noise_params_for_gain(
    profile: SensorProfile,
    k: float,
    r: float,
    read_residual: float = 0.0,
    row_residual: float = 0.0,
) -> NoiseParams:
    """Evaluate the log-linear scale laws at system gain ``k``.

    ``read_residual`` and ``row_residual`` are the already-drawn Gaussian
    residuals (in log units); pass 0 for the median scales.
    """
    if k <= 0 or r <= 0:
        raise DomainError(f"system gain and ISO ratio must be positive, got K={k}, r={r}")
    log_k = math.log(k)
    sigma_read = math.exp(profile.read_slope * log_k + profile.read_intercept + read_residual)
    sigma_row = math.exp(profile.row_slope * log_k + profile.row_intercept + row_residual)
    return NoiseParams(
        system_gain_k=float(k),
        iso_ratio_r=float(r),
        sigma_read=sigma_read,
        sigma_row=sigma_row,
        tukey_lambda=profile.tukey_lambda,
        color_bias=profile.color_bias,
        profile_name=profile.name,
    )


@dataclass
class NoiseRealization:
    """Per-site noise fields (ADU) kept for diagnostics."""

    clean: np.ndarray
    shot: np.ndarray
    read: np.ndarray
    row: np.ndarray
    quant: np.ndarray
    composed: np.ndarray = field(repr=False)


def _check_mosaic(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[2] != 4:
        raise DimensionError(f"expected an (h, w, 4) RGGB mosaic, got shape {raw.shape}")
    return raw


def tukey_lambda_quantile(u: np.ndarray, lam: float) -> np.ndarray:
    """Quantile function of the standard Tukey-lambda distribution."""
    u = np.asarray(u, dtype=np.float64)
    if abs(lam) < 1e-12:
        return np.log(u) - np.log1p(-u)
    return (u**lam - (1.0 - u) ** lam) / lam


def sample_tukey_lambda(rng: np.random.Generator, lam: float, size) -> np.ndarray:
    u = rng.random(size)
    # keep u off the endpoints, where the quantile is infinite for lam <= 0
    tiny = 2.0**-54
    return tukey_lambda_quantile(np.clip(u, tiny, 1.0 - tiny), lam)


def add_shot_noise(raw_adu: np.ndarray, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Photon shot noise at reduced exposure.

    The signal is divided by the ISO ratio r, converted to photoelectrons with
    the system gain K (ADU per electron), replaced by a Poisson draw, and
    scaled back by K and r. The expectation is unchanged; the variance is
    ``K * r * signal``.
    """
    raw_adu = _check_mosaic(raw_adu)
    if np.any(raw_adu < 0) or not np.all(np.isfinite(raw_adu)):
        raise DomainError("shot noise needs finite, non-negative ADU values")
    gain = params.system_gain_k * params.iso_ratio_r
    electrons = raw_adu / gain
    return rng.poisson(electrons).astype(np.float64) * gain


def add_read_noise(raw_adu: np.ndarray, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Additive Tukey-lambda read noise with scale sigma_read plus a per-plane DC offset."""
    raw_adu = _check_mosaic(raw_adu)
    if not math.isfinite(params.sigma_read) or params.sigma_read < 0:
        raise DomainError(f"sigma_read must be finite and non-negative, got {params.sigma_read}")
    noise = params.sigma_read * sample_tukey_lambda(rng, params.tukey_lambda, raw_adu.shape)
    return raw_adu + noise + np.asarray(params.color_bias, dtype=np.float64)


def add_row_noise(raw_adu: np.ndarray, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """One Gaussian offset per sensor row.

    Mosaic plane row j covers two sensor rows: 2j (R, G1) and 2j+1 (G2, B),
    so each plane row draws two offsets.
    """
    raw_adu = _check_mosaic(raw_adu)
    if params.sigma_row < 0:
        raise DomainError(f"sigma_row must be non-negative, got {params.sigma_row}")
    offsets = rng.normal(0.0, params.sigma_row, size=(raw_adu.shape[0], 2))
    field_ = np.repeat(offsets, 2, axis=1)[:, None, :]  # (h, 1, 4): R,G1 <- even row; G2,B <- odd row
    return raw_adu + field_


def add_quant_noise(raw_adu: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform rounding error on [-0.5, 0.5] ADU."""
    raw_adu = _check_mosaic(raw_adu)
    return raw_adu + rng.uniform(-0.5, 0.5, size=raw_adu.shape)


def row_offsets(field_: np.ndarray) -> np.ndarray:
    """Recover per-sensor-row offsets (shape ``(2h,)``) from an added row field."""
    field_ = _check_mosaic(field_)
    even = field_[:, :, 0:2].reshape(field_.shape[0], -1)
    odd = field_[:, :, 2:4].reshape(field_.shape[0], -1)
    return np.stack([even[:, 0], odd[:, 0]], axis=1).reshape(-1)


def inject_noise(
    raw: np.ndarray,
    camera,
    noise: NoiseParams,
    rng: np.random.Generator,
    components: Iterable[str] = COMPONENTS,
    return_realization: bool = False,
):
    """Apply the enabled noise components to a normalized mosaic.

    ``raw`` in [0, 1] is scaled to ADU by ``camera.white_level``, passed through
    shot, read, row and quantization noise (skipping disabled components
    but never reordering), clamped to ``[0, white_level]`` and scaled back.
    With ``return_realization`` the per-component fields are returned too.
    """
    enabled = set(components)
    unknown = enabled - set(COMPONENTS)
    if unknown:
        raise ConfigError(f"unknown noise components {sorted(unknown)}")
    raw = _check_mosaic(raw)
    if np.any(raw < 0) or np.any(raw > 1):
        raise DomainError("inject_noise expects a normalized mosaic in [0, 1]")

    white_level = camera.white_level
    clean = raw * white_level
    stages = {}
    x = clean
    if "shot" in enabled:
        y = add_shot_noise(x, noise, rng)
        stages["shot"], x = y - x, y
    if "read" in enabled:
        y = add_read_noise(x, noise, rng)
        stages["read"], x = y - x, y
    if "row" in enabled:
        y = add_row_noise(x, noise, rng)
        stages["row"], x = y - x, y
    if "quant" in enabled:
        y = add_quant_noise(x, rng)
        stages["quant"], x = y - x, y

    out = np.clip(x, 0.0, white_level) / white_level
    if not return_realization:
        return out
    zeros = np.zeros_like(clean)
    realization = NoiseRealization(
        clean=clean,
        shot=stages.get("shot", zeros),
        read=stages.get("read", zeros),
        row=stages.get("row", zeros),
        quant=stages.get("quant", zeros),
        composed=x,
    )
    return out, realization
