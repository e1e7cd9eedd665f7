"""Deterministic synthetic test panoramas.

The bundled rasters are piecewise-smooth "cartoon" spheres: flat-coloured
geodesic discs over a low-frequency gradient, softened with a wrap-aware
Gaussian blur and value range inset from [0, 1]. That composition is chosen
deliberately:

* soft edges give the resampling benchmarks content whose interpolation
  error is dominated by kernel choice rather than aliasing;
* flat regions with edges are the regime where an edge-preserving prior
  genuinely out-reconstructs the pseudo-inverse baseline;
* the inset value range keeps intermediate over/undershoot inside [0, 1],
  so the final clamp does not disturb consistency identities.

Discs are drawn on the sphere (not the raster), so the content has no
preferred longitude and the wrap seam is continuous by construction.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

#: names of the bundled panoramas, in fixed order
PANORAMA_NAMES = ("discs-a", "discs-b", "discs-c")
_SEEDS = {"discs-a": 104, "discs-b": 202, "discs-c": 303}

ASSET_DIR = Path(__file__).resolve().parents[2] / "assets" / "panoramas"


def sphere_directions(height: int, width: int):
    """Unit direction vectors (x, y, z) for every ERP pixel center."""
    jj, ii = np.meshgrid(np.arange(width), np.arange(height), indexing="xy")
    theta = 2.0 * np.pi * ((jj + 0.5) / width - 0.5)
    phi = np.pi * ((ii + 0.5) / height - 0.5)
    return (
        np.cos(phi) * np.cos(theta),
        np.cos(phi) * np.sin(theta),
        np.sin(phi),
    )


def cartoon_panorama(
    height: int,
    width: int,
    seed: int,
    discs: int = 40,
    smooth_sigma: float = 2.5,
    lo: float = 0.15,
    hi: float = 0.85,
) -> np.ndarray:
    """Deterministic (H, W, 3) panorama in [lo, hi]."""
    rng = np.random.default_rng(seed)
    x, y, z = sphere_directions(height, width)
    theta = np.arctan2(y, x)
    phi = np.arcsin(np.clip(z, -1.0, 1.0))
    img = np.empty((height, width, 3))
    # cos(k*theta) is stationary at the wrap seam, so the deterministic
    # background adds no gradient concentration at theta = +/- pi
    for c in range(3):
        img[:, :, c] = 0.5 + 0.2 * np.cos(theta * (c + 1)) * np.cos(phi)
    for _ in range(discs):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        radius = rng.uniform(0.08, 0.5)  # radians of arc
        colour = rng.uniform(0.05, 0.95, size=3)
        mask = (x * v[0] + y * v[1] + z * v[2]) > np.cos(radius)
        img[mask] = colour
    img = gaussian_filter(img, sigma=(smooth_sigma, smooth_sigma, 0), mode=("reflect", "wrap", "nearest"))
    img -= img.min()
    img /= np.ptp(img)
    return lo + (hi - lo) * img


def make_panorama(name: str, height: int = 1024, width: int = 2048) -> np.ndarray:
    """One of the named bundled panoramas at an arbitrary resolution."""
    if name not in _SEEDS:
        raise KeyError(f"unknown panorama {name!r}; choose from {PANORAMA_NAMES}")
    return cartoon_panorama(height, width, _SEEDS[name])


def bundled_panorama_paths() -> list:
    """Paths of the committed 1024x2048 PNGs (generated by scripts/)."""
    return [ASSET_DIR / f"{name}.png" for name in PANORAMA_NAMES]
