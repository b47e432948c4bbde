import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from lowlight_eqa.errors import ConfigError, DomainError
from lowlight_eqa.raw_noise import (
    NoiseParams,
    add_quant_noise,
    add_read_noise,
    add_row_noise,
    add_shot_noise,
    inject_noise,
    load_profile,
    noise_params_for_gain,
    row_offsets,
    sample_tukey_lambda,
    tukey_lambda_quantile,
)
from lowlight_eqa.seeding import make_rng
from lowlight_eqa.unprocessor import CameraParams

PROFILE = load_profile()
CAM = CameraParams.identity()


def params(k=1.0, r=1.0, sigma_read=0.0, sigma_row=0.0, lam=0.0, bias=(0.0, 0.0, 0.0, 0.0)):
    return NoiseParams(k, r, sigma_read, sigma_row, lam, bias)


def const(value, shape=(250, 100, 4)):
    return np.full(shape, float(value))


# --- shot -------------------------------------------------------------------


def test_shot_zero_stays_zero():
    out = add_shot_noise(const(0.0, (8, 8, 4)), params(k=3.0, r=200.0), make_rng(0))
    assert np.all(out == 0)


def test_shot_mean_preserved_at_1000_adu():
    out = add_shot_noise(const(1000.0), params(k=2.0, r=1.0), make_rng(1))
    assert out.size == 10**5
    assert abs(out.mean() - 1000.0) / 1000.0 < 0.01


@pytest.mark.parametrize("signal", [10.0, 100.0, 3000.0])
def test_shot_mean_preserved_across_levels(signal):
    out = add_shot_noise(const(signal), params(k=0.5, r=2.0), make_rng(int(signal)))
    assert abs(out.mean() - signal) / signal < 0.01


def test_shot_variance_linear_in_signal():
    levels = np.array([100.0, 400.0, 1600.0])
    p = params(k=1.5, r=2.0)
    var = np.array([add_shot_noise(const(s), p, make_rng(i)).var() for i, s in enumerate(levels)])
    slope, intercept, rvalue, *_ = stats.linregress(levels, var)
    assert slope > 0 and rvalue**2 > 0.95
    assert slope == pytest.approx(3.0, rel=0.05)  # variance = K r S


def test_shot_negative_is_domain_error():
    with pytest.raises(DomainError):
        add_shot_noise(const(-1.0, (2, 2, 4)), params(), make_rng(0))


# --- read -------------------------------------------------------------------


@pytest.mark.parametrize("lam", [-0.2, -0.05, 0.0, 0.14, 0.5])
def test_tukey_quantile_matches_scipy(lam):
    u = np.linspace(0.001, 0.999, 101)
    np.testing.assert_allclose(tukey_lambda_quantile(u, lam), stats.tukeylambda.ppf(u, lam), rtol=1e-7, atol=1e-9)


def test_tukey_samples_follow_scipy_cdf():
    x = sample_tukey_lambda(make_rng(3), -0.05, 20_000)
    assert stats.kstest(x, stats.tukeylambda(-0.05).cdf).statistic < 0.015


def test_read_degenerate_is_identity():
    raw = const(500.0, (16, 16, 4))
    np.testing.assert_allclose(add_read_noise(raw, params(sigma_read=0.0), make_rng(0)), raw, atol=1e-9)
    np.testing.assert_allclose(add_read_noise(raw, params(sigma_read=1e-12), make_rng(0)), raw, atol=1e-9)


def test_read_color_bias_is_pure_offset():
    raw = const(500.0, (4, 4, 4))
    out = add_read_noise(raw, params(sigma_read=0.0, bias=(2.5, 0.0, 0.0, 0.0)), make_rng(0))
    assert np.all(out[..., 0] == 502.5)
    assert np.all(out[..., 1:] == 500.0)


def test_read_scale_law_doubling_k():
    rng = make_rng(11)
    n, k = 20_000, 0.7

    def log_sigmas(kk):
        res = rng.normal(0.0, PROFILE.read_residual_sigma, n)
        return np.log([noise_params_for_gain(PROFILE, kk, 100.0, e, 0.0).sigma_read for e in res])

    shift = np.median(log_sigmas(2 * k)) - np.median(log_sigmas(k))
    assert shift == pytest.approx(PROFILE.read_slope * math.log(2), rel=0.05)


def test_nonpositive_gain_rejected():
    with pytest.raises(DomainError):
        noise_params_for_gain(PROFILE, 0.0, 100.0)


# --- row --------------------------------------------------------------------


def test_row_zero_sigma_identity():
    raw = const(100.0, (6, 6, 4))
    assert np.array_equal(add_row_noise(raw, params(sigma_row=0.0), make_rng(0)), raw)


def test_row_field_constant_along_rows_and_variance():
    sigma = 2.0
    field = add_row_noise(np.zeros((5000, 6, 4)), params(sigma_row=sigma), make_rng(5))
    even = field[:, :, 0:2].reshape(5000, -1)
    odd = field[:, :, 2:4].reshape(5000, -1)
    assert np.all(np.ptp(even, axis=1) == 0) and np.all(np.ptp(odd, axis=1) == 0)
    offsets = row_offsets(field)
    assert offsets.size == 10_000
    assert abs(offsets.var() - sigma**2) / sigma**2 < 0.05
    lag1 = np.corrcoef(offsets[:-1], offsets[1:])[0, 1]
    assert abs(lag1) < 0.05


# --- quantization -----------------------------------------------------------


def test_quant_bounds_mean_variance():
    q = add_quant_noise(np.zeros((1000, 250, 4)), make_rng(9))
    assert q.min() >= -0.5 and q.max() <= 0.5
    assert abs(q.mean()) < 0.002
    assert abs(q.var() - 1 / 12) / (1 / 12) < 0.02


# --- composition ------------------------------------------------------------


def noisy_params():
    return noise_params_for_gain(PROFILE, 2.0, 150.0)


def test_all_disabled_is_identity():
    raw = make_rng(0).uniform(0, 1, (8, 8, 4))
    np.testing.assert_allclose(inject_noise(raw, CAM, noisy_params(), make_rng(1), components=()), raw, atol=1e-9)


def test_degenerate_params_identity():
    raw = make_rng(0).uniform(0, 1, (8, 8, 4))
    out = inject_noise(raw, CAM, params(), make_rng(1), components=("read", "row"))
    np.testing.assert_allclose(out, raw, atol=1e-9)


def test_same_seed_bitwise_identical():
    raw = make_rng(0).uniform(0, 1, (16, 16, 4))
    a = inject_noise(raw, CAM, noisy_params(), make_rng(123))
    b = inject_noise(raw, CAM, noisy_params(), make_rng(123))
    assert a.tobytes() == b.tobytes()


def test_order_matches_manual_composition():
    raw = make_rng(0).uniform(0, 1, (16, 16, 4))
    p = noisy_params()
    out = inject_noise(raw, CAM, p, make_rng(77))
    rng = make_rng(77)
    x = raw * CAM.white_level
    x = add_quant_noise(add_row_noise(add_read_noise(add_shot_noise(x, p, rng), p, rng), p, rng), rng)
    manual = np.clip(x, 0, CAM.white_level) / CAM.white_level
    assert out.tobytes() == manual.tobytes()


def test_realization_sums_to_composed():
    raw = make_rng(0).uniform(0, 1, (16, 16, 4))
    out, real = inject_noise(raw, CAM, noisy_params(), make_rng(4), return_realization=True)
    np.testing.assert_allclose(real.clean + real.shot + real.read + real.row + real.quant, real.composed, atol=1e-6)
    np.testing.assert_allclose(out, np.clip(real.composed, 0, CAM.white_level) / CAM.white_level)


def test_snr_decreases_with_gain():
    raw = np.full((100, 100, 4), 0.5)
    snrs = []
    for k in np.geomspace(0.1, 6.0, 6):
        out = inject_noise(raw, CAM, noise_params_for_gain(PROFILE, k, 100.0), make_rng(8))
        snrs.append(out.mean() / out.std())
    assert all(a > b for a, b in zip(snrs, snrs[1:]))


def test_rejects_out_of_range_input_and_unknown_component():
    with pytest.raises(DomainError):
        inject_noise(np.full((2, 2, 4), 1.5), CAM, noisy_params(), make_rng(0))
    with pytest.raises(ConfigError):
        inject_noise(np.zeros((2, 2, 4)), CAM, noisy_params(), make_rng(0), components=("dark",))


@given(arrays(np.float64, (4, 4, 4), elements=st.floats(0, 1)), st.floats(0.1, 6.0), st.integers(0, 2**31))
def test_output_always_normalized(raw, k, seed):
    out = inject_noise(raw, CAM, noise_params_for_gain(PROFILE, k, 300.0), make_rng(seed))
    assert out.min() >= 0.0 and out.max() <= 1.0


# --- profiles ---------------------------------------------------------------


def test_default_profile_loads():
    assert PROFILE.white_level == 16383
    assert PROFILE.read_residual_sigma >= 0 and len(PROFILE.color_bias) == 4


def test_profile_validation(tmp_path):
    text = (tmp_path / "p.toml")
    text.write_text('name = "x"\nwhite_level = 100\n')
    with pytest.raises(ConfigError):
        load_profile(text)
    good = "\n".join(
        [
            'name = "t"', "white_level = 1023", "tukey_lambda = -0.6", "read_slope = 1.0", "read_intercept = 0.0",
            "read_residual_sigma = 0.1", "row_slope = 1.0", "row_intercept = -2.0", "row_residual_sigma = 0.1",
            "color_bias = [0, 0, 0, 0]",
        ]
    )
    text.write_text(good)
    with pytest.raises(ConfigError):
        load_profile(text)
    text.write_text(good.replace("-0.6", "0.1"))
    assert load_profile(text).white_level == 1023
