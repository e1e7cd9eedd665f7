"""Coordinate mathematics for equirectangular and gnomonic tangent projections.

Conventions (used consistently across the package):

* longitude theta in [-pi, pi), wrapping modulo 2*pi;
* latitude phi in [-pi/2, pi/2], increasing with the pixel row index;
* ERP pixel centers sit at half-integer offsets, so pixel (x, y) of a
  W x H grid maps to theta = 2*pi*((x + 0.5)/W - 0.5),
  phi = pi*((y + 0.5)/H - 0.5);
* tangent-plane coordinates are dimensionless gnomonic units
  (tangent of the angular offset from the plane center).

All functions are pure and vectorized: scalar or ndarray inputs of any
matching shape are accepted, and outputs follow numpy broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindPlaneError, ConfigError, DomainError

TWO_PI = 2.0 * np.pi

# Guards the division by zeta in the forward gnomonic projection; points at
# or behind the tangent point's great circle are rejected, not extrapolated.
ZETA_MIN = 1e-9


def wrap_theta(theta):
    """Wrap longitudes into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=np.float64) + np.pi, TWO_PI) - np.pi


def angular_distance(theta1, phi1, theta2, phi2):
    """Great-circle angle between two sphere points, in radians.

    Uses the haversine form, which stays precise for tiny separations where
    the arccos of a dot product would lose half the significant digits.
    """
    phi1 = np.asarray(phi1, dtype=np.float64)
    phi2 = np.asarray(phi2, dtype=np.float64)
    hav = (
        np.sin((phi2 - phi1) / 2.0) ** 2
        + np.cos(phi1) * np.cos(phi2) * np.sin((np.asarray(theta2) - np.asarray(theta1)) / 2.0) ** 2
    )
    return 2.0 * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))


@dataclass(frozen=True)
class SphereCoord:
    """A single point on the unit sphere (longitude, latitude in radians)."""

    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_theta(self.theta)))
        object.__setattr__(self, "phi", float(np.clip(self.phi, -np.pi / 2, np.pi / 2)))


@dataclass(frozen=True)
class ErpGrid:
    """Pixel grid of an equirectangular raster (half-pixel-center convention)."""

    width: int
    height: int

    def __post_init__(self):
        if self.width != 2 * self.height:
            raise ConfigError(f"ERP grid must be 2:1, got {self.width}x{self.height}")
        if self.height < 2 or self.width % 2 != 0:
            raise ConfigError(f"invalid ERP grid {self.width}x{self.height}")


@dataclass(frozen=True)
class TangentPlaneSpec:
    """A square gnomonic camera: center direction, full field of view, resolution."""

    center_theta: float
    center_phi: float
    fov: float
    resolution: int

    def __post_init__(self):
        if not 0.0 < self.fov < np.pi:
            raise ConfigError(f"fov must be in (0, pi), got {self.fov}")
        if self.resolution < 2:
            raise ConfigError(f"resolution must be >= 2, got {self.resolution}")

    @property
    def half_fov(self) -> float:
        return 0.5 * self.fov

    @property
    def extent(self) -> float:
        """Half-width of the plane in gnomonic units."""
        return float(np.tan(0.5 * self.fov))


@dataclass(frozen=True)
class TangentLayout:
    """Ordered set of tangent planes jointly covering the sphere."""

    planes: tuple = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.planes)

    def __iter__(self):
        return iter(self.planes)


def erp_to_sphere(x, y, grid: ErpGrid):
    """Map continuous ERP pixel coordinates to sphere angles.

    Valid pixel coordinates span [-0.5, W-0.5) horizontally and
    [-0.5, H-0.5] vertically (pixel centers at integers).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x < -0.5) or np.any(x >= grid.width - 0.5):
        raise DomainError("x pixel coordinate outside [-0.5, W-0.5)")
    if np.any(y < -0.5) or np.any(y > grid.height - 0.5):
        raise DomainError("y pixel coordinate outside [-0.5, H-0.5]")
    theta = TWO_PI * ((x + 0.5) / grid.width - 0.5)
    phi = np.pi * ((y + 0.5) / grid.height - 0.5)
    return theta, phi


def sphere_to_erp(theta, phi, grid: ErpGrid):
    """Map sphere angles to continuous ERP pixel coordinates (inverse of
    :func:`erp_to_sphere` up to longitude wrap)."""
    theta = wrap_theta(theta)
    phi = np.clip(np.asarray(phi, dtype=np.float64), -np.pi / 2, np.pi / 2)
    x = (theta / TWO_PI + 0.5) * grid.width - 0.5
    y = (phi / np.pi + 0.5) * grid.height - 0.5
    return x, y


def plane_zeta(theta, phi, center: SphereCoord):
    """Cosine of the angular distance from (theta, phi) to the plane center.

    Positive values lie on the visible hemisphere of the tangent plane.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    sp, cp = np.sin(center.phi), np.cos(center.phi)
    return sp * np.sin(phi) + cp * np.cos(phi) * np.cos(theta - center.theta)


def sphere_to_tangent(theta, phi, center: SphereCoord, zeta_min: float = ZETA_MIN):
    """Forward gnomonic projection onto the plane tangent at ``center``.

    Raises :class:`BehindPlaneError` when any point lies at or behind the
    great circle 90 degrees from the tangent point.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    zeta = plane_zeta(theta, phi, center)
    if np.any(zeta <= zeta_min):
        raise BehindPlaneError("point at or behind the tangent plane's horizon")
    sp, cp = np.sin(center.phi), np.cos(center.phi)
    dt = theta - center.theta
    x_t = np.cos(phi) * np.sin(dt) / zeta
    y_t = (cp * np.sin(phi) - sp * np.cos(phi) * np.cos(dt)) / zeta
    return x_t, y_t


def tangent_to_sphere(x_t, y_t, center: SphereCoord):
    """Inverse gnomonic projection; the rho -> 0 limit returns the center."""
    x_t = np.asarray(x_t, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(y_t))):
        raise DomainError("tangent coordinates must be finite")
    rho = np.hypot(x_t, y_t)
    c = np.arctan(rho)
    sin_c, cos_c = np.sin(c), np.cos(c)
    sp, cp = np.sin(center.phi), np.cos(center.phi)
    # Guard rho == 0; the quotients sin(c)/rho and x_t*sin(c) both vanish
    # there, so substituting rho=1 in the denominator is exact in the limit.
    safe_rho = np.where(rho > 0.0, rho, 1.0)
    phi = np.arcsin(np.clip(cos_c * sp + y_t * sin_c * cp / safe_rho, -1.0, 1.0))
    theta = center.theta + np.arctan2(
        x_t * sin_c, safe_rho * cp * cos_c - y_t * sp * sin_c
    )
    theta = np.where(rho > 0.0, theta, center.theta)
    phi = np.where(rho > 0.0, phi, center.phi)
    return wrap_theta(theta), phi


def octadecaplex_layout(fov_deg: float = 100.0, resolution: int = 512) -> TangentLayout:
    """The 18-plane layout: three latitude rows at +45/0/-45 degrees with six
    planes each; the polar rows are staggered 30 degrees relative to the
    equatorial row. The default 100-degree field of view leaves generous
    overlap, so full sphere coverage holds with margin."""
    fov = np.deg2rad(fov_deg)
    rows = [
        (np.deg2rad(45.0), 30.0),
        (0.0, 0.0),
        (np.deg2rad(-45.0), 30.0),
    ]
    planes = []
    for phi_c, offset in rows:
        thetas = sorted(wrap_theta(np.deg2rad(np.arange(-180.0, 180.0, 60.0) + offset)))
        for theta_c in thetas:
            planes.append(TangentPlaneSpec(float(theta_c), float(phi_c), float(fov), resolution))
    return TangentLayout(tuple(planes))


def layout_for_grid(grid: ErpGrid, fov_deg: float = 100.0) -> TangentLayout:
    """Layout with tangent resolution scaled to the ERP grid (H/2 per side)."""
    return octadecaplex_layout(fov_deg=fov_deg, resolution=max(2, grid.height // 2))


def coverage_margin(layout: TangentLayout, thetas, phis) -> float:
    """min over sample points of (max over planes of zeta) - cos(half fov).

    Positive values certify that every sampled point is strictly inside at
    least one plane's field-of-view cone.
    """
    best = np.full(np.shape(thetas), -np.inf)
    for plane in layout:
        center = SphereCoord(plane.center_theta, plane.center_phi)
        z = plane_zeta(thetas, phis, center) - np.cos(plane.half_fov)
        np.maximum(best, z, out=best)
    return float(best.min())
