"""Gamma decode/encode and exposure scaling: the noise-free low-light branch.

Images are ``(H, W, 3)`` float arrays in [0, 1]. 8-bit arrays are only
produced or consumed at file boundaries (``to_uint8`` / ``to_unit`` and the
PNG helpers).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError, DomainError

GAMMA = 2.2
EPSILON = 1e-8


def to_unit(img: np.ndarray) -> np.ndarray:
    """Normalize an 8-bit image to float64 in [0, 1]; float input is returned as float64."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    if np.issubdtype(img.dtype, np.integer):
        raise DomainError(f"expected uint8 or float image, got {img.dtype}")
    return img.astype(np.float64, copy=False)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize, rounding half away from zero."""
    scaled = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    # values are non-negative after the clamp, so floor(x + 0.5) rounds half away from zero
    return np.floor(scaled + 0.5).astype(np.uint8)


def check_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError(f"expected a non-empty (H, W, 3) image, got shape {img.shape}")


def decode_srgb_to_linear(img: np.ndarray) -> np.ndarray:
    """Gamma-expand sRGB values with a pure 2.2 power law and a 1e-8 floor."""
    img = to_unit(img)
    check_image(img)
    return np.maximum(img, EPSILON) ** GAMMA


def encode_linear_to_srgb(img: np.ndarray) -> np.ndarray:
    """Gamma-compress linear values (power 1/2.2). Values are clamped to [0, 1] first."""
    img = np.asarray(img, dtype=np.float64)
    check_image(img)
    return np.clip(img, 0.0, 1.0) ** (1.0 / GAMMA)


def ev_scale(delta_ev: float) -> float:
    if not np.isfinite(delta_ev) or delta_ev < 0:
        raise DomainError(f"delta_ev must be a finite non-negative number of stops, got {delta_ev}")
    return 2.0 ** (-float(delta_ev))


def apply_ev_drop(img: np.ndarray, delta_ev: float) -> np.ndarray:
    """Scale linear intensities by 2**-delta_ev."""
    return np.asarray(img, dtype=np.float64) * ev_scale(delta_ev)


def evdrop_srgb(img: np.ndarray, delta_ev: float) -> np.ndarray:
    """decode -> EV drop -> encode, returning a float sRGB image."""
    return encode_linear_to_srgb(apply_ev_drop(decode_srgb_to_linear(img), delta_ev))


def mean_linear_intensity(img: np.ndarray) -> float:
    return float(decode_srgb_to_linear(img).mean())


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_png(path: str | Path, img: np.ndarray) -> None:
    """Write an image as 8-bit RGB PNG. Float input is quantized with ``to_uint8``."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # no metadata chunks, so identical pixels give identical bytes
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG", optimize=False, compress_level=6)
