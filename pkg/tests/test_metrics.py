import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omnisr.errors import ConfigError
from omnisr.metrics import (
    PSNR_CAP,
    latitude_weights,
    psnr,
    ssim,
    ws_psnr,
    ws_ssim,
)


def test_latitude_weights_shape_and_symmetry():
    w = latitude_weights(64)
    assert w.shape == (64,)
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)
    assert np.all(w > 0)
    # poles get the least weight, equator the most
    assert w[0] < w[32]
    np.testing.assert_allclose(w[0], np.cos((0.5 - 32) * np.pi / 64))


def test_uniform_offset_has_analytic_wspsnr(rng):
    ref = rng.uniform(0.2, 0.6, (40, 80, 3))
    for delta in (0.5, 0.125, 0.01):
        expected = -20.0 * np.log10(delta)
        assert ws_psnr(ref, ref + delta) == pytest.approx(expected, abs=1e-9)


def test_identical_images_hit_the_cap(rng):
    img = rng.random((16, 32))
    assert ws_psnr(img, img) == PSNR_CAP
    assert psnr(img, img) == PSNR_CAP
    assert ws_ssim(img, img) == 1.0
    assert ssim(img, img) == 1.0


def test_wspsnr_with_uniform_weights_is_plain_psnr(rng):
    # an equator-only crop has nearly uniform weights; compare instead the
    # uniform-weight entry point against a hand-rolled MSE computation
    ref = rng.random((24, 48, 3))
    test = rng.random((24, 48, 3))
    mse = np.mean((ref - test) ** 2)
    assert psnr(ref, test) == pytest.approx(10 * np.log10(1 / mse), abs=1e-10)


@given(seed=st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_vertical_flip_invariance(seed):
    rng = np.random.default_rng(seed)
    ref = rng.random((16, 32))
    test = rng.random((16, 32))
    assert ws_psnr(ref, test) == pytest.approx(ws_psnr(ref[::-1], test[::-1]), abs=1e-10)
    assert ws_ssim(ref, test) == pytest.approx(ws_ssim(ref[::-1], test[::-1]), abs=1e-10)


@given(seed=st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_longitude_roll_invariance(seed):
    rng = np.random.default_rng(seed)
    ref = rng.random((16, 32))
    test = rng.random((16, 32))
    assert ws_psnr(ref, test) == pytest.approx(
        ws_psnr(np.roll(ref, 7, axis=1), np.roll(test, 7, axis=1)), abs=1e-10
    )


def test_polar_error_counts_less_than_equatorial(rng):
    ref = np.full((32, 64), 0.5)
    polar = ref.copy()
    polar[0, :] += 0.2
    equatorial = ref.copy()
    equatorial[16, :] += 0.2
    assert ws_psnr(ref, polar) > ws_psnr(ref, equatorial)
    assert psnr(ref, polar) == pytest.approx(psnr(ref, equatorial), abs=1e-10)


def test_ssim_detects_structure_loss(rng):
    ref = rng.random((32, 64))
    blurred = 0.5 * (np.roll(ref, 1, axis=0) + ref)
    assert ws_ssim(ref, blurred) < 1.0
    assert ws_ssim(ref, blurred) > ws_ssim(ref, rng.random((32, 64)))


def test_shape_mismatch_raises(rng):
    with pytest.raises(ConfigError):
        ws_psnr(rng.random((8, 16)), rng.random((8, 17)))
    with pytest.raises(ConfigError):
        ws_ssim(rng.random((2, 8, 16, 3)), rng.random((2, 8, 16, 3)))


def test_gray_is_single_channel_case(rng):
    ref = rng.random((16, 32))
    test = rng.random((16, 32))
    assert ws_psnr(ref, test) == ws_psnr(ref[:, :, None], test[:, :, None])
