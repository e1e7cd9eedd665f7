import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omnisr.errors import BehindPlaneError, ConfigError, DomainError
from omnisr.geometry import (
    ErpGrid,
    SphereCoord,
    TangentPlaneSpec,
    angular_distance,
    coverage_margin,
    erp_to_sphere,
    layout_for_grid,
    octadecaplex_layout,
    plane_zeta,
    sphere_to_erp,
    sphere_to_tangent,
    tangent_to_sphere,
    wrap_theta,
)

finite_theta = st.floats(-np.pi, np.pi, allow_nan=False, exclude_max=True)
inner_phi = st.floats(-1.4, 1.4, allow_nan=False)


def test_wrap_theta_range_and_periodicity():
    thetas = np.linspace(-20, 20, 1001)
    wrapped = wrap_theta(thetas)
    assert np.all(wrapped >= -np.pi) and np.all(wrapped < np.pi)
    np.testing.assert_allclose(np.cos(wrapped), np.cos(thetas), atol=1e-12)
    np.testing.assert_allclose(np.sin(wrapped), np.sin(thetas), atol=1e-12)


def test_erp_grid_validation():
    grid = ErpGrid(128, 64)
    assert grid.width == 2 * grid.height
    with pytest.raises(ConfigError):
        ErpGrid(130, 64)
    with pytest.raises(ConfigError):
        ErpGrid(2, 1)


def test_erp_pixel_centers_map_to_expected_angles():
    grid = ErpGrid(8, 4)
    s = erp_to_sphere(np.array([0.0]), np.array([0.0]), grid)
    # first pixel center sits half a pixel in from the -pi / -pi/2 corner
    np.testing.assert_allclose(s[0], 2 * np.pi * (0.5 / 8 - 0.5))
    np.testing.assert_allclose(s[1], np.pi * (0.5 / 4 - 0.5))
    s = erp_to_sphere(np.array([7.0]), np.array([3.0]), grid)
    np.testing.assert_allclose(s[0], 2 * np.pi * (7.5 / 8 - 0.5))
    np.testing.assert_allclose(s[1], np.pi * (3.5 / 4 - 0.5))


def test_erp_sphere_round_trip():
    grid = ErpGrid(256, 128)
    xs = np.linspace(-0.4, 255.4, 300)
    ys = np.linspace(-0.4, 127.4, 300)
    theta, phi = erp_to_sphere(xs, ys, grid)
    bx, by = sphere_to_erp(theta, phi, grid)
    np.testing.assert_allclose(bx, xs, atol=1e-9)
    np.testing.assert_allclose(by, ys, atol=1e-9)


def test_erp_to_sphere_domain_checks():
    grid = ErpGrid(8, 4)
    with pytest.raises(DomainError):
        erp_to_sphere(np.array([8.0]), np.array([0.0]), grid)
    with pytest.raises(DomainError):
        erp_to_sphere(np.array([0.0]), np.array([4.1]), grid)


@given(
    ct=finite_theta,
    cp=st.floats(-0.9, 0.9),
    dt=st.floats(-0.5, 0.5),
    dp=st.floats(-0.5, 0.5),
)
@settings(max_examples=200, deadline=None)
def test_gnomonic_round_trip_property(ct, cp, dt, dp):
    center = SphereCoord(ct, cp)
    theta, phi = ct + dt, np.clip(cp + dp, -1.5, 1.5)
    if plane_zeta(theta, phi, center) <= 1e-6:
        return
    x, y = sphere_to_tangent(theta, phi, center)
    bt, bp = tangent_to_sphere(x, y, center)
    assert angular_distance(theta, phi, bt, bp) < 1e-12


def test_gnomonic_center_maps_to_origin_exactly():
    center = SphereCoord(0.3, -0.2)
    x, y = sphere_to_tangent(0.3, -0.2, center)
    assert abs(x) < 1e-15 and abs(y) < 1e-15
    bt, bp = tangent_to_sphere(0.0, 0.0, center)
    assert bt == center.theta and bp == center.phi


def test_gnomonic_rejects_points_behind_plane():
    center = SphereCoord(0.0, 0.0)
    with pytest.raises(BehindPlaneError):
        sphere_to_tangent(np.pi / 2, 0.0, center)  # on the horizon
    with pytest.raises(BehindPlaneError):
        sphere_to_tangent(np.pi - 0.1, 0.0, center)  # behind


def test_great_circles_through_center_stay_straight():
    # points along the meridian of the tangent point map onto the y axis
    center = SphereCoord(0.7, 0.1)
    phis = center.phi + np.linspace(-0.6, 0.6, 25)
    x, y = sphere_to_tangent(np.full_like(phis, center.theta), phis, center)
    np.testing.assert_allclose(x, 0.0, atol=1e-12)
    assert np.all(np.diff(y) > 0)  # monotone with latitude


def test_octadecaplex_structure():
    layout = octadecaplex_layout()
    assert len(layout) == 18
    phis = sorted({round(p.center_phi, 12) for p in layout})
    np.testing.assert_allclose(phis, np.deg2rad([-45.0, 0.0, 45.0]))
    for target in phis:
        row = sorted(p.center_theta for p in layout if abs(p.center_phi - target) < 1e-9)
        assert len(row) == 6
        np.testing.assert_allclose(np.diff(row), np.deg2rad(60.0))
    equator = sorted(p.center_theta for p in layout if abs(p.center_phi) < 1e-9)
    polar = sorted(p.center_theta for p in layout if p.center_phi > 0.1)
    # polar rows sit halfway between equatorial centers
    np.testing.assert_allclose(polar[0] - equator[0], np.deg2rad(30.0))


def test_octadecaplex_ordering_is_deterministic():
    a = octadecaplex_layout()
    b = octadecaplex_layout()
    assert a.planes == b.planes
    keys = [(-p.center_phi, p.center_theta) for p in a]
    assert keys == sorted(keys)


def test_layout_covers_sphere(rng):
    layout = octadecaplex_layout(resolution=8)
    n = 200_000
    phis = np.arcsin(rng.uniform(-1, 1, n))
    thetas = rng.uniform(-np.pi, np.pi, n)
    assert coverage_margin(layout, thetas, phis) > 0


def test_narrow_fov_loses_coverage(rng):
    layout = octadecaplex_layout(fov_deg=40.0, resolution=8)
    phis = np.arcsin(rng.uniform(-1, 1, 50_000))
    thetas = rng.uniform(-np.pi, np.pi, 50_000)
    assert coverage_margin(layout, thetas, phis) < 0


def test_layout_for_grid_scales_resolution():
    layout = layout_for_grid(ErpGrid(512, 256))
    assert all(p.resolution == 128 for p in layout)


def test_plane_spec_validation():
    with pytest.raises(ConfigError):
        TangentPlaneSpec(center_theta=0.0, center_phi=0.0, fov=0.0, resolution=32)
    with pytest.raises(ConfigError):
        TangentPlaneSpec(center_theta=0.0, center_phi=0.0, fov=1.0, resolution=1)
    with pytest.raises(ConfigError):
        TangentPlaneSpec(center_theta=0.0, center_phi=0.0, fov=np.pi, resolution=32)


def test_angular_distance_precision():
    # antipodal-ish and nearly-identical points both behave
    assert angular_distance(0.0, 0.0, np.pi, 0.0) == pytest.approx(np.pi)
    tiny = angular_distance(0.1, 0.2, 0.1 + 1e-14, 0.2)
    assert 0 < tiny < 1e-13
