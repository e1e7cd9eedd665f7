import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omnisr.degrade import (
    apply_degradation,
    apply_pinv,
    build_degradation,
    dense_operator,
    dense_pinv,
    downsample_matrix,
)
from omnisr.errors import ConfigError


def test_downsample_matrix_rows_sum_to_one():
    for n, s in ((16, 2), (32, 4)):
        mat = downsample_matrix(n, s)
        np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-12)


def test_downsample_matrix_shift_equivariant_in_interior():
    mat = downsample_matrix(64, 4)
    # interior rows are translates of each other
    mid = mat[8, 24:40]
    np.testing.assert_allclose(mat[9, 28:44], mid, atol=1e-12)


def test_downsample_rejects_indivisible_length():
    with pytest.raises(ConfigError):
        downsample_matrix(17, 4)
    with pytest.raises(ConfigError):
        build_degradation(3, (32, 64))
    with pytest.raises(ConfigError):
        build_degradation(4, (30, 64))


def test_separable_matches_dense_kron(rng):
    d = build_degradation(2, (8, 16))
    dense = dense_operator(d)
    for _ in range(3):
        x = rng.random((8, 16))
        np.testing.assert_allclose(
            apply_degradation(d, x).ravel(), dense @ x.ravel(), atol=1e-12
        )
    y = rng.random((4, 8))
    np.testing.assert_allclose(
        apply_pinv(d, y).ravel(), dense_pinv(d) @ y.ravel(), atol=1e-12
    )


@pytest.mark.parametrize("scale", [2, 4])
def test_right_inverse_identity(scale, rng):
    d = build_degradation(scale, (64, 128))
    y = rng.random((64 // scale, 128 // scale, 3))
    np.testing.assert_allclose(apply_degradation(d, apply_pinv(d, y)), y, atol=1e-10)


@pytest.mark.parametrize("scale", [2, 4])
def test_projection_is_idempotent(scale, rng):
    d = build_degradation(scale, (64, 128))
    x = rng.random((64, 128))
    once = apply_pinv(d, apply_degradation(d, x))
    twice = apply_pinv(d, apply_degradation(d, once))
    np.testing.assert_allclose(twice, once, atol=1e-10)


def test_constants_survive_degradation_and_pinv():
    d = build_degradation(4, (32, 64))
    const = np.full((32, 64, 2), 0.25)
    np.testing.assert_allclose(apply_degradation(d, const), 0.25, atol=1e-12)


def test_degradation_noise_is_seeded(rng):
    d = build_degradation(2, (16, 32), noise_sigma=0.01)
    x = rng.random((16, 32))
    a = apply_degradation(d, x, rng=np.random.default_rng(7))
    b = apply_degradation(d, x, rng=np.random.default_rng(7))
    c = apply_degradation(d, x, rng=np.random.default_rng(8))
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)
    clean = build_degradation(2, (16, 32))
    assert np.abs(apply_degradation(clean, x) - a).max() < 0.06  # noise is small


def test_wrap_boundary_makes_columns_rotation_equivariant(rng):
    # rotating the panorama by one LR pixel (s HR columns) rotates the output
    d = build_degradation(4, (16, 32))
    x = rng.random((16, 32))
    rolled = np.roll(x, 4, axis=1)
    np.testing.assert_allclose(
        apply_degradation(d, rolled), np.roll(apply_degradation(d, x), 1, axis=1), atol=1e-12
    )


@given(st.integers(0, 6))
@settings(max_examples=7, deadline=None)
def test_lr_shape_property(k):
    h = 8 + 4 * k
    d = build_degradation(4, (h, 2 * h))
    assert d.lr_shape == (h // 4, h // 2)
