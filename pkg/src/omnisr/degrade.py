"""Linear degradation operator (antialiased bicubic downsampling) and its
exact pseudo-inverse.

The operator is separable: one downsampling matrix per axis, built from the
cubic convolution kernel stretched by the scale factor and renormalized per
output row. Pseudo-inverses are computed once by SVD, giving the exact
right-inverse identity A A+ = I that the consistency correction relies on.

Boundary handling matches the resampling module: periodic columns (ERP
longitude wrap) and reflected rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .resample import _MODES, _map_index, cubic_kernel


@dataclass(frozen=True)
class LinearDegradation:
    """Separable bicubic downsampling operator for one HR shape and scale."""

    scale: int
    hr_shape: tuple  # (H, W)
    d_v: np.ndarray = field(repr=False)  # (H/s, H)
    d_h: np.ndarray = field(repr=False)  # (W/s, W)
    d_v_pinv: np.ndarray = field(repr=False)
    d_h_pinv: np.ndarray = field(repr=False)
    noise_sigma: float = 0.0

    @property
    def lr_shape(self) -> tuple:
        return (self.hr_shape[0] // self.scale, self.hr_shape[1] // self.scale)


def downsample_matrix(n: int, scale: int, boundary: str = "reflect", a: float = -0.5) -> np.ndarray:
    """(n/scale, n) antialiased bicubic downsampling matrix for one axis.

    The kernel support is stretched by the scale factor so the matrix
    low-passes before decimating; each row is renormalized to sum to one,
    which preserves constants exactly.
    """
    if n % scale != 0:
        raise ConfigError(f"axis length {n} not divisible by scale {scale}")
    mode = _MODES[boundary]
    out_n = n // scale
    mat = np.zeros((out_n, n), dtype=np.float64)
    for i in range(out_n):
        center = (i + 0.5) * scale - 0.5
        lo = int(np.floor(center - 2.0 * scale)) + 1
        hi = int(np.ceil(center + 2.0 * scale))
        taps = np.arange(lo, hi)
        w = cubic_kernel((taps - center) / scale, a=a)
        cols = _map_index(taps, n, mode)
        np.add.at(mat[i], cols, w)
        mat[i] /= mat[i].sum()
    return mat


def build_degradation(
    scale: int,
    hr_shape: tuple,
    a: float = -0.5,
    noise_sigma: float = 0.0,
) -> LinearDegradation:
    """Construct the operator and factorize its per-axis pseudo-inverses."""
    if scale not in (2, 4):
        raise ConfigError(f"scale must be 2 or 4, got {scale}")
    height, width = hr_shape
    if height % scale or width % scale:
        raise ConfigError(f"shape {hr_shape} not divisible by scale {scale}")
    if noise_sigma < 0:
        raise ConfigError("noise sigma must be >= 0")
    d_v = downsample_matrix(height, scale, "reflect", a)
    d_h = downsample_matrix(width, scale, "wrap", a)
    return LinearDegradation(
        scale=scale,
        hr_shape=(height, width),
        d_v=d_v,
        d_h=d_h,
        d_v_pinv=np.linalg.pinv(d_v),
        d_h_pinv=np.linalg.pinv(d_h),
        noise_sigma=float(noise_sigma),
    )


def _apply_separable(mv: np.ndarray, mh: np.ndarray, img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    height, width, nchan = img.shape
    if mv.shape[1] != height or mh.shape[1] != width:
        raise ConfigError(
            f"image shape {(height, width)} incompatible with operator "
            f"{(mv.shape[1], mh.shape[1])}"
        )
    tall = mv @ img.reshape(height, width * nchan)
    tall = tall.reshape(-1, width, nchan)
    out = np.einsum("ow,hwc->hoc", mh, tall, optimize=True)
    return out[:, :, 0] if squeeze else out


def apply_degradation(d: LinearDegradation, img, rng: np.random.Generator | None = None):
    """y = A x (+ Gaussian noise when the operator's sigma is positive)."""
    out = _apply_separable(d.d_v, d.d_h, img)
    if d.noise_sigma > 0.0:
        rng = np.random.default_rng() if rng is None else rng
        out = out + rng.normal(0.0, d.noise_sigma, size=out.shape)
    return out


def apply_pinv(d: LinearDegradation, img):
    """x = A+ y, the minimum-norm consistent reconstruction."""
    return _apply_separable(d.d_v_pinv, d.d_h_pinv, img)


def dense_operator(d: LinearDegradation) -> np.ndarray:
    """The full (H*W/s^2, H*W) matrix, Kronecker of the axis matrices.

    Brute-force oracle for small shapes; the separable fast path must match
    it to floating-point tolerance.
    """
    return np.kron(d.d_v, d.d_h)


def dense_pinv(d: LinearDegradation) -> np.ndarray:
    return np.kron(d.d_v_pinv, d.d_h_pinv)
