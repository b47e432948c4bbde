import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lowlight_eqa.color_space import decode_srgb_to_linear
from lowlight_eqa.errors import DimensionError, DomainError
from lowlight_eqa.isp_renderer import demosaic_bilinear, render
from lowlight_eqa.selftest import psnr, smooth_gradient
from lowlight_eqa.unprocessor import CameraParams, cfa_from_planes, mosaic, unprocess

CAM = CameraParams.identity()


def scalar_oracle(linear):
    """High-precision value of the 8-bit code for a linear intensity, rounding half away from zero."""
    mpmath.mp.dps = 30
    v = mpmath.mpf(linear) ** (mpmath.mpf(1) / mpmath.mpf("2.2")) * 255
    return int(mpmath.floor(v + mpmath.mpf("0.5")))


def test_white_renders_255():
    out = render(np.ones((3, 5, 4)), CAM, 0.0)
    assert out.dtype == np.uint8 and out.shape == (6, 10, 3)
    assert np.all(out == 255)


@pytest.mark.parametrize("ev,linear", [(2.0, "0.25"), (9.0, "0.001953125")])
def test_ev_drop_codes_match_oracle(ev, linear):
    expected = scalar_oracle(linear)
    assert render(np.ones((2, 2, 4)), CAM, ev)[0, 0, 0] == expected


def test_oracle_values():
    # 0.25 ** (1/2.2) * 255 = 135.79..., 2**-9 ** (1/2.2) * 255 = 14.96...
    assert scalar_oracle("0.25") == 136
    assert scalar_oracle("0.001953125") == 15


@given(st.floats(0, 1), st.integers(1, 6), st.integers(1, 6))
def test_demosaic_constant_is_constant(v, h, w):
    out = demosaic_bilinear(np.full((h, w, 4), v))
    np.testing.assert_allclose(out, v, rtol=1e-12, atol=1e-15)


@given(arrays(np.float64, (3, 4, 4), elements=st.floats(0, 1)))
def test_demosaic_keeps_measured_samples(planes):
    rgb = demosaic_bilinear(planes)
    np.testing.assert_array_equal(mosaic(rgb), planes)
    assert rgb.min() >= planes.min() - 1e-12 and rgb.max() <= planes.max() + 1e-12


def test_demosaic_linear_ramp_exact_in_interior():
    # bilinear interpolation reproduces a horizontal linear ramp away from the borders
    y, x = np.mgrid[0:8, 0:8].astype(float)
    ramp = np.repeat((x / 10.0)[..., None], 3, axis=2)
    out = demosaic_bilinear(mosaic(ramp))
    np.testing.assert_allclose(out[1:-1, 1:-1], ramp[1:-1, 1:-1], atol=1e-12)


@given(arrays(np.float64, (2, 3, 4), elements=st.floats(0, 1)), st.floats(0, 12))
def test_output_in_byte_range(raw, ev):
    cam = CameraParams.from_rgb_to_cam(np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]]),
                                       wb_gain_red=2.2, wb_gain_blue=1.7, brightness_gain=1.4)
    out = render(raw, cam, ev)
    assert out.dtype == np.uint8 and out.shape == (4, 6, 3)


def test_mean_linear_intensity_scales_with_ev():
    rng = np.random.default_rng(2)
    raw = rng.uniform(0.3, 0.7, (32, 32, 4))
    base = decode_srgb_to_linear(render(raw, CAM, 0.0)).mean()
    for ev in (1.0, 2.0, 3.0):
        ratio = decode_srgb_to_linear(render(raw, CAM, ev)).mean() / base
        assert ratio == pytest.approx(2.0**-ev, rel=0.02)


def test_round_trip_gradient_psnr():
    img = smooth_gradient()
    assert psnr(img, render(unprocess(img, CAM, inverse_tone_map=False), CAM, 0.0)) >= 40.0


def test_domain_and_shape_errors():
    with pytest.raises(DomainError):
        render(np.full((2, 2, 4), 1.2), CAM)
    with pytest.raises(DimensionError):
        render(np.zeros((2, 2, 3)), CAM)


def test_cfa_layout():
    planes = np.stack([np.full((1, 1), v) for v in (1.0, 2.0, 3.0, 4.0)], axis=-1)
    assert cfa_from_planes(planes).tolist() == [[1.0, 2.0], [3.0, 4.0]]
