import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omnisr.denoise import (
    IdentityDenoiser,
    TvDenoiser,
    make_denoiser,
    total_variation,
    tv_prox,
)
from omnisr.errors import ConfigError, ShapeMismatch


def test_tv_prox_two_pixel_closed_form():
    # |a - b| > 2*lam: both move toward each other by lam;
    # otherwise they meet at the average
    out = tv_prox(np.array([[0.0], [1.0]]), 0.1, iters=300)
    np.testing.assert_allclose(out, [[0.1], [0.9]], atol=1e-10)
    out = tv_prox(np.array([[0.5], [0.52]]), 0.1, iters=300)
    np.testing.assert_allclose(out, [[0.51], [0.51]], atol=1e-10)


def test_tv_prox_constant_fixed_point():
    const = np.full((9, 7), 0.42)
    np.testing.assert_array_equal(tv_prox(const, 0.3), const)


def test_tv_prox_zero_strength_is_identity(rng):
    img = rng.random((6, 6))
    out = tv_prox(img, 0.0)
    np.testing.assert_array_equal(out, img)
    assert out is not img


@given(lam=st.floats(0.01, 0.5), seed=st.integers(0, 100))
@settings(max_examples=25, deadline=None)
def test_tv_prox_decreases_objective(lam, seed):
    rng = np.random.default_rng(seed)
    img = rng.random((12, 12))
    out = tv_prox(img, lam, iters=30)

    def energy(u):
        return 0.5 * np.sum((u - img) ** 2) + lam * total_variation(u)

    assert energy(out) <= energy(img) + 1e-12
    assert total_variation(out) <= total_variation(img) + 1e-12


def test_tv_prox_matches_long_run_solution(rng):
    img = rng.random((8, 8))
    quick = tv_prox(img, 0.1, iters=200)
    long = tv_prox(img, 0.1, iters=2000)
    np.testing.assert_allclose(quick, long, atol=1e-3)


def test_tv_prox_rejects_negative_strength(rng):
    with pytest.raises(ConfigError):
        tv_prox(rng.random((4, 4)), -0.1)


def test_identity_denoiser_round_trip(rng):
    den = IdentityDenoiser()
    stack = rng.random((18, 8, 8, 3))
    state = den.init(stack, 5)
    np.testing.assert_array_equal(den.predict_clean(state, 5), stack)
    np.testing.assert_array_equal(den.finalize(state), stack)
    blended = rng.random(stack.shape)
    state = den.advance(state, blended, 5)
    np.testing.assert_array_equal(den.finalize(state), blended)


def test_identity_denoiser_copies_input(rng):
    den = IdentityDenoiser()
    stack = rng.random((2, 4, 4, 1))
    state = den.init(stack, 1)
    stack[0, 0, 0, 0] = 99.0
    assert den.finalize(state)[0, 0, 0, 0] != 99.0


def test_denoiser_validates_stack_shape(rng):
    den = IdentityDenoiser()
    with pytest.raises(ConfigError):
        den.init(rng.random((8, 8, 3)), 5)
    state = den.init(rng.random((2, 8, 8, 3)), 5)
    with pytest.raises(ShapeMismatch):
        den.advance(state, rng.random((2, 4, 4, 3)), 5)


def test_tv_denoiser_strength_schedule():
    den = TvDenoiser(lam_max=0.1)
    assert den.strength(10, 10) == pytest.approx(0.1)
    assert den.strength(5, 10) == pytest.approx(0.05)
    assert den.strength(0, 10) == 0.0


def test_tv_denoiser_smooths_each_plane(rng):
    den = TvDenoiser(lam_max=0.05, iters=10)
    stack = rng.random((3, 10, 10, 2))
    state = den.init(stack, 4)
    pred = den.predict_clean(state, 4)
    for i in range(3):
        assert total_variation(pred[i]) < total_variation(stack[i])
    # zero-strength step passes through untouched
    np.testing.assert_array_equal(den.predict_clean(state, 0), stack)


def test_tv_denoiser_advance_replaces_state(rng):
    den = TvDenoiser(lam_max=0.05)
    stack = rng.random((2, 6, 6, 1))
    state = den.init(stack, 3)
    blended = rng.random(stack.shape)
    state = den.advance(state, blended, 3)
    np.testing.assert_array_equal(den.finalize(state), blended)
    assert state.total_steps == 3


def test_denoiser_factory():
    assert isinstance(make_denoiser("identity"), IdentityDenoiser)
    den = make_denoiser("tv", lam_max=0.2, iters=5)
    assert den.lam_max == 0.2 and den.iters == 5
    with pytest.raises(ConfigError):
        make_denoiser("unet")
    with pytest.raises(ConfigError):
        make_denoiser("external")  # endpoint required
    with pytest.raises(ConfigError):
        TvDenoiser(lam_max=-1.0)
