import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from lowlight_eqa.errors import ConfigError, DimensionError
from lowlight_eqa.raw_noise import load_profile
from lowlight_eqa.unprocessor import (
    LADDER_QUANTILES,
    CameraParams,
    SamplingConfig,
    cfa_from_planes,
    inverse_smoothstep,
    load_ccm_bank,
    mosaic,
    rgb_to_cam_from_bank,
    sample_camera_params,
    smoothstep,
    unprocess,
)

PROFILE = load_profile()


@pytest.fixture(scope="module")
def draws():
    return [sample_camera_params(s, profile=PROFILE) for s in range(10_000)]


def test_ranges_hold_for_every_draw(draws):
    for cam, noise in draws:
        assert 0.1 <= noise.system_gain_k <= 6.0
        assert 100.0 <= noise.iso_ratio_r <= 300.0
        assert noise.sigma_read > 0 and noise.sigma_row > 0
        assert 1.9 <= cam.wb_gain_red <= 2.4 and 1.5 <= cam.wb_gain_blue <= 1.9
        assert 1 / 1.1 <= cam.brightness_gain <= 1 / 0.5


def test_log_k_is_uniform_ks(draws):
    lo, hi = math.log(0.1), math.log(6.0)
    log_k = np.log([n.system_gain_k for _, n in draws])
    ks = stats.kstest(log_k, stats.uniform(loc=lo, scale=hi - lo).cdf).statistic
    assert ks < 0.02


def test_iso_ratio_is_uniform_ks(draws):
    r = np.array([n.iso_ratio_r for _, n in draws])
    assert stats.kstest(r, stats.uniform(loc=100, scale=200).cdf).statistic < 0.02


def test_ccm_invariants_every_draw(draws):
    for cam, _ in draws[:2000]:
        np.testing.assert_allclose(cam.rgb_to_cam.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(cam.cam_to_rgb @ cam.rgb_to_cam, np.eye(3), atol=1e-5)


def test_same_seed_identical_draw():
    assert sample_camera_params(42, profile=PROFILE) == sample_camera_params(42, profile=PROFILE)
    assert sample_camera_params(42, profile=PROFILE) != sample_camera_params(43, profile=PROFILE)


def test_inverted_range_is_config_error():
    with pytest.raises(ConfigError):
        SamplingConfig(k_range=(6.0, 0.1))
    with pytest.raises(ConfigError):
        SamplingConfig.from_dict({"iso_ratio_range": [300, 100]})
    with pytest.raises(ConfigError):
        SamplingConfig.from_dict({"bogus": 1})


def test_ladder_coupled_quantiles():
    for level, q in LADDER_QUANTILES.items():
        cam_c, noise_c = sample_camera_params(5, profile=PROFILE, level_index=level, ladder_coupled=True)
        cam_f, noise_f = sample_camera_params(5, profile=PROFILE, level_index=level)
        expected_k = math.exp(math.log(0.1) + q * (math.log(6.0) - math.log(0.1)))
        assert noise_c.system_gain_k == pytest.approx(expected_k, rel=1e-12)
        assert noise_c.iso_ratio_r == pytest.approx(100 + 200 * q)
        assert cam_c == cam_f  # only K and r are coupled


def test_bank_loads_and_matrices_invertible():
    bank = load_ccm_bank()
    assert bank.ndim == 3 and bank.shape[1:] == (3, 3) and len(bank) >= 2
    m = rgb_to_cam_from_bank(bank, np.ones(len(bank)))
    assert abs(np.linalg.det(m)) > 1e-3


def test_inverse_smoothstep_oracle():
    mpmath.mp.dps = 30
    for x in (0.05, 0.2, 0.5, 0.73, 0.97):
        y = mpmath.findroot(lambda t: 3 * t**2 - 2 * t**3 - x, 0.5)
        assert inverse_smoothstep(np.array(x)) == pytest.approx(float(y), abs=1e-12)


@given(st.floats(0.0, 1.0))
def test_smoothstep_round_trip(x):
    assert smoothstep(inverse_smoothstep(np.array(x))) == pytest.approx(x, abs=1e-12)


def test_identity_white_maps_to_white():
    out = unprocess(np.ones((4, 6, 3)), CameraParams.identity())
    assert out.shape == (2, 3, 4)
    np.testing.assert_allclose(out, 1.0, atol=1e-12)


def test_gray_half_matches_scalar_oracle():
    mpmath.mp.dps = 30
    y = mpmath.findroot(lambda t: 3 * t**2 - 2 * t**3 - mpmath.mpf("0.5"), 0.4)
    expected = float(y ** mpmath.mpf("2.2"))
    out = unprocess(np.full((4, 4, 3), 0.5), CameraParams.identity())
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_mosaic_sites():
    img = np.arange(4 * 4 * 3, dtype=np.float64).reshape(4, 4, 3)
    planes = mosaic(img)
    assert planes.shape == (2, 2, 4)
    assert planes[..., 0].tolist() == img[0::2, 0::2, 0].tolist()
    assert planes[..., 3].tolist() == img[1::2, 1::2, 2].tolist()


def test_odd_dimensions_rejected():
    with pytest.raises(DimensionError):
        unprocess(np.zeros((5, 4, 3)), CameraParams.identity())


@given(arrays(np.float64, (4, 6, 3), elements=st.floats(0, 1)))
def test_mosaic_is_bijection_onto_sites(img):
    planes = mosaic(img)
    cfa = cfa_from_planes(planes)
    # every CFA site holds exactly the channel it samples
    np.testing.assert_array_equal(cfa[0::2, 0::2], img[0::2, 0::2, 0])
    np.testing.assert_array_equal(cfa[0::2, 1::2], img[0::2, 1::2, 1])
    np.testing.assert_array_equal(cfa[1::2, 0::2], img[1::2, 0::2, 1])
    np.testing.assert_array_equal(cfa[1::2, 1::2], img[1::2, 1::2, 2])
    assert planes.size * 3 == img.size


@given(
    arrays(np.float64, (4, 4, 3), elements=st.floats(0, 1)),
    st.integers(0, 2**32),
)
def test_highlights_never_exceed_one(img, seed):
    cam, _ = sample_camera_params(seed, profile=PROFILE)
    out = unprocess(img, cam)
    assert out.min() >= 0.0 and out.max() <= 1.0
