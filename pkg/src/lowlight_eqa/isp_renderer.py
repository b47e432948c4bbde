"""Simplified forward ISP: noisy RGGB mosaic -> 8-bit sRGB.

Steps: white balance (with brightness), bilinear demosaic, camera -> RGB
color correction, EV drop in linear space, gamma compression, 8-bit
quantization. There is deliberately no forward tone curve, so an image
unprocessed with the inverse tone map enabled comes back with flattened
contrast (mid-tones pulled toward 0.5).
"""

from __future__ import annotations

import numpy as np

from .color_space import GAMMA, apply_ev_drop, to_uint8
from .errors import DimensionError, DomainError
from .unprocessor import CameraParams, apply_ccm, cfa_from_planes

# 3x3 bilinear weights; normalized by the weight of available samples
_KERNEL = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
_GREEN_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]])


def _correlate3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # mirror padding (d c b | a b c d) keeps the CFA parity at the borders
    padded = np.pad(img, 1, mode="reflect")
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            if kernel[dy, dx]:
                out += kernel[dy, dx] * padded[dy : dy + h, dx : dx + w]
    return out


def cfa_masks(h: int, w: int) -> np.ndarray:
    """Boolean sample masks ``(3, H, W)`` for R, G, B on an RGGB layout."""
    masks = np.zeros((3, h, w), dtype=bool)
    masks[0, 0::2, 0::2] = True
    masks[1, 0::2, 1::2] = True
    masks[1, 1::2, 0::2] = True
    masks[2, 1::2, 1::2] = True
    return masks


def demosaic_bilinear(planes: np.ndarray) -> np.ndarray:
    """Bilinear RGGB demosaic: ``(h, w, 4)`` planes -> ``(2h, 2w, 3)`` RGB.

    Measured samples are kept as-is; missing ones are the weighted mean of the
    nearest same-color neighbors.
    """
    if planes.ndim != 3 or planes.shape[2] != 4:
        raise DimensionError(f"expected an (h, w, 4) RGGB mosaic, got shape {planes.shape}")
    cfa = cfa_from_planes(np.asarray(planes, dtype=np.float64))
    h, w = cfa.shape
    masks = cfa_masks(h, w)
    out = np.empty((h, w, 3), dtype=np.float64)
    for c, kernel in enumerate((_KERNEL, _GREEN_KERNEL, _KERNEL)):
        m = masks[c].astype(np.float64)
        num = _correlate3(cfa * m, kernel)
        den = _correlate3(m, kernel)
        out[..., c] = np.where(masks[c], cfa, num / den)
    return out


def render_linear(raw: np.ndarray, camera: CameraParams, delta_ev: float = 0.0) -> np.ndarray:
    """White balance through EV drop: linear display RGB in [0, 2**-delta_ev]."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[2] != 4:
        raise DimensionError(f"expected an (h, w, 4) RGGB mosaic, got shape {raw.shape}")
    if np.any(raw < 0) or np.any(raw > 1):
        raise DomainError("render expects a normalized mosaic in [0, 1]")
    x = np.clip(raw * camera.plane_gains(), 0.0, 1.0)
    x = demosaic_bilinear(x)
    x = np.clip(apply_ccm(x, camera.cam_to_rgb), 0.0, 1.0)
    return apply_ev_drop(x, delta_ev)


def render(raw: np.ndarray, camera: CameraParams, delta_ev: float = 0.0) -> np.ndarray:
    """Normalized RGGB mosaic -> uint8 sRGB image of twice the plane resolution."""
    x = render_linear(raw, camera, delta_ev)
    return to_uint8(x ** (1.0 / GAMMA))
