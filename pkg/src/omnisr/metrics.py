"""Quality metrics for ERP panoramas.

WS-PSNR and WS-SSIM weight each pixel (or each SSIM window center) by the
cosine of its latitude, compensating the oversampling of polar rows in the
equirectangular format. Plain PSNR/SSIM are the uniform-weight special
cases and are used for tangent-plane viewport comparisons.

SSIM constants are the standard ones: 11x11 Gaussian window with
sigma = 1.5, K1 = 0.01, K2 = 0.03 on a dynamic range of 1.0.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ConfigError

#: reported value for a zero-error comparison (log of zero otherwise)
PSNR_CAP = 99.0

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def latitude_weights(height: int) -> np.ndarray:
    """Per-row cosine-latitude weights, w(j) = cos((j + 0.5 - H/2) * pi / H)."""
    j = np.arange(height, dtype=np.float64)
    return np.cos((j + 0.5 - height / 2.0) * np.pi / height)


def _check_pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ConfigError(f"shape mismatch: {ref.shape} vs {test.shape}")
    if ref.ndim == 2:
        ref, test = ref[:, :, None], test[:, :, None]
    if ref.ndim != 3:
        raise ConfigError("images must be (H, W) or (H, W, C)")
    return ref, test


def _weighted_mse(ref, test, row_weights):
    w = np.broadcast_to(row_weights[:, None, None], ref.shape)
    return float(np.sum(w * (ref - test) ** 2) / np.sum(w))


def ws_psnr(ref, test, cap: float = PSNR_CAP) -> float:
    """Latitude-weighted PSNR in dB; identical inputs return ``cap``."""
    ref, test = _check_pair(ref, test)
    wmse = _weighted_mse(ref, test, latitude_weights(ref.shape[0]))
    if wmse <= 0.0:
        return cap
    return min(cap, 10.0 * np.log10(1.0 / wmse))


def psnr(ref, test, cap: float = PSNR_CAP) -> float:
    """Plain PSNR (uniform weights) in dB."""
    ref, test = _check_pair(ref, test)
    wmse = _weighted_mse(ref, test, np.ones(ref.shape[0]))
    if wmse <= 0.0:
        return cap
    return min(cap, 10.0 * np.log10(1.0 / wmse))


def _gaussian_window(n: int, sigma: float) -> np.ndarray:
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def _ssim_map(ref_c, test_c):
    """Per-pixel SSIM map for one channel (same-size, reflected borders)."""
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def blur(img):
        return convolve1d(convolve1d(img, win, axis=0, mode="reflect"), win, axis=1, mode="reflect")

    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mu_x = blur(ref_c)
    mu_y = blur(test_c)
    sigma_x = blur(ref_c * ref_c) - mu_x * mu_x
    sigma_y = blur(test_c * test_c) - mu_y * mu_y
    sigma_xy = blur(ref_c * test_c) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return num / den


def _weighted_ssim(ref, test, row_weights) -> float:
    total = 0.0
    wsum = 0.0
    w = np.broadcast_to(row_weights[:, None], ref.shape[:2])
    for c in range(ref.shape[2]):
        smap = _ssim_map(ref[:, :, c], test[:, :, c])
        total += float(np.sum(w * smap))
        wsum += float(np.sum(w))
    return total / wsum


def ws_ssim(ref, test) -> float:
    """SSIM with each window weighted by its center row's latitude weight."""
    ref, test = _check_pair(ref, test)
    return _weighted_ssim(ref, test, latitude_weights(ref.shape[0]))


def ssim(ref, test) -> float:
    """Plain mean SSIM (uniform window weights)."""
    ref, test = _check_pair(ref, test)
    return _weighted_ssim(ref, test, np.ones(ref.shape[0]))
