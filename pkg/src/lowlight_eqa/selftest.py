"""Statistical invariant suite behind the ``selftest`` subcommand.

Each check returns a ``CheckResult``; the suite takes a few seconds and
needs no external assets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .color_space import decode_srgb_to_linear, evdrop_srgb
from .degradation import LEVEL_EV, LEVELS
from .isp_renderer import render
from .raw_noise import NoiseParams, add_quant_noise, add_row_noise, add_shot_noise, row_offsets
from .seeding import derive_seed, make_rng
from .unprocessor import CameraParams, unprocess


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self) -> None:
        self.passed = bool(self.passed)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(peak**2 / mse)


def smooth_gradient(h: int = 128, w: int = 192) -> np.ndarray:
    """Slowly varying 8-bit test image with distinct ramps per channel."""
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    u, v = x / (w - 1), y / (h - 1)
    img = np.stack([0.1 + 0.8 * u, 0.15 + 0.7 * v, 0.5 + 0.35 * np.sin(np.pi * (u + v) / 2)], axis=-1)
    return np.floor(np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8)


def _params(k=1.0, r=1.0, sigma_row=0.0) -> NoiseParams:
    return NoiseParams(system_gain_k=k, iso_ratio_r=r, sigma_read=0.0, sigma_row=sigma_row, tukey_lambda=0.0)


def check_shot_mean(seed: int) -> CheckResult:
    rng = make_rng(derive_seed(seed, "selftest", "shot-mean"))
    signal = 200.0
    out = add_shot_noise(np.full((250, 100, 4), signal), _params(k=2.0, r=1.5), rng)
    rel = abs(out.mean() - signal) / signal
    return CheckResult("shot noise mean", rel < 0.01, f"relative error {rel:.2e} (limit 1e-2, 1e5 samples)")


def check_shot_variance(seed: int) -> CheckResult:
    rng = make_rng(derive_seed(seed, "selftest", "shot-var"))
    signals = np.linspace(50.0, 2000.0, 12)
    p = _params(k=1.5, r=2.0)
    variances = [add_shot_noise(np.full((50, 50, 4), s), p, rng).var() for s in signals]
    slope, intercept = np.polyfit(signals, variances, 1)
    pred = slope * signals + intercept
    r2 = 1.0 - np.sum((variances - pred) ** 2) / np.sum((variances - np.mean(variances)) ** 2)
    return CheckResult("shot variance vs signal", r2 > 0.95, f"R^2 {r2:.4f}, slope {slope:.3f} (expected K*r = 3.0)")


def check_quantization(seed: int) -> CheckResult:
    rng = make_rng(derive_seed(seed, "selftest", "quant"))
    n = add_quant_noise(np.zeros((1000, 250, 4)), rng)  # 1e6 samples
    mean_ok = abs(n.mean()) < 0.002
    var_err = abs(n.var() - 1 / 12) / (1 / 12)
    return CheckResult(
        "quantization noise", mean_ok and var_err < 0.02, f"mean {n.mean():+.5f}, variance rel. error {var_err:.4f}"
    )


def check_row_noise(seed: int) -> CheckResult:
    rng = make_rng(derive_seed(seed, "selftest", "row"))
    sigma = 3.0
    field_ = add_row_noise(np.zeros((4096, 8, 4)), _params(sigma_row=sigma), rng)
    even, odd = field_[:, :, 0:2], field_[:, :, 2:4]
    constant = all(np.ptp(part.reshape(part.shape[0], -1), axis=1).max() == 0 for part in (even, odd))
    rel = abs(row_offsets(field_).var() - sigma**2) / sigma**2
    return CheckResult("row noise", constant and rel < 0.05, f"constant within rows: {constant}, variance rel. error {rel:.4f}")


def check_round_trip(seed: int) -> CheckResult:
    img = smooth_gradient()
    cam = CameraParams.identity()
    out = render(unprocess(img, cam, inverse_tone_map=False), cam, 0.0)
    value = psnr(img, out)
    return CheckResult("round-trip PSNR", value >= 40.0, f"{value:.2f} dB on a smooth gradient (limit 40)")


def check_ladder(seed: int) -> CheckResult:
    img = smooth_gradient()
    base = decode_srgb_to_linear(img).mean()
    means = [decode_srgb_to_linear(evdrop_srgb(img, LEVEL_EV[lv])).mean() for lv in LEVELS]
    monotone = all(a > b for a, b in zip(means, means[1:]))
    worst = max(abs(m / (base * 2.0 ** -LEVEL_EV[lv]) - 1.0) for lv, m in zip(LEVELS, means))
    return CheckResult("EV ladder", monotone and worst < 0.01, f"strictly decreasing: {monotone}, worst ratio error {worst:.2e}")


CHECKS: tuple[Callable[[int], CheckResult], ...] = (
    check_shot_mean,
    check_shot_variance,
    check_quantization,
    check_row_noise,
    check_round_trip,
    check_ladder,
)


def run_selftest(seed: int = 0, emit: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        res = check(seed)
        results.append(res)
        if emit:
            emit(res.line())
    return results
