import math

import numpy as np
import pytest

from serrinlab.errors import (
    CenterOutsideDomain,
    NonPositiveAxis,
    NonPositiveRadius,
)
from serrinlab.geometry import (
    Ellipsoid,
    Fourier2D,
    boundary_grid,
    boundary_frame,
    build_domain,
    closest_boundary_points,
    distance_to_boundary,
    ellipse_as_fourier,
    geometric_summary,
    radii_about,
    unit_ball_volume,
    volume_grid,
)


def test_build_domain_variants(tmp_path):
    d = build_domain({"kind": "ellipsoid", "axes": [1, 1]})
    assert isinstance(d, Ellipsoid) and d.dim == 2 and d.is_ball
    f = build_domain('{"kind": "fourier2d", "cos": [1]}')
    assert isinstance(f, Fourier2D) and f.dim == 2
    path = tmp_path / "dom.json"
    path.write_text(d.to_json())
    assert build_domain(str(path)) == d


def test_build_domain_errors():
    with pytest.raises(NonPositiveRadius):
        build_domain({"kind": "fourier2d", "cos": [1, 1.5]})
    with pytest.raises(NonPositiveAxis):
        build_domain({"kind": "ellipsoid", "axes": [1, -1]})


def test_unit_disk_boundary_grid():
    g = boundary_grid(build_domain({"kind": "ellipsoid", "axes": [1, 1]}), 64)
    assert g.weights.sum() == pytest.approx(2 * math.pi, abs=1e-13)
    np.testing.assert_allclose(g.curvature, 1.0, atol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(g.normals, axis=1), 1.0, atol=1e-14)


def test_fourier_disk_grid_matches():
    g = boundary_grid(build_domain({"kind": "fourier2d", "cos": [1]}), 64)
    assert g.weights.sum() == pytest.approx(2 * math.pi, abs=1e-13)
    np.testing.assert_allclose(g.curvature, 1.0, atol=1e-13)


def test_ellipse_curvature_and_perimeter():
    d = Ellipsoid((2.0, 1.0))
    g = boundary_grid(d, 256)
    assert g.weights.sum() == pytest.approx(9.688448220547675, rel=1e-12)
    i = np.argmin(np.linalg.norm(g.nodes - [2, 0], axis=1))
    j = np.argmin(np.linalg.norm(g.nodes - [0, 1], axis=1))
    assert g.curvature[i] == pytest.approx(2.0, rel=1e-12)
    assert g.curvature[j] == pytest.approx(0.25, rel=1e-12)


def test_curvature_by_finite_difference_of_normal():
    d = Fourier2D((1.0, 0.0, 0.1, 0.05), (0.0, 0.02))
    g = boundary_grid(d, 512)
    # kappa = d(nu)/ds along the curve
    t = g.params[:, 0]
    h = 1e-5
    x1, n1 = boundary_frame(d, (t + h)[:, None])
    x0, n0 = boundary_frame(d, (t - h)[:, None])
    kappa = np.linalg.norm(n1 - n0, axis=1) / np.linalg.norm(x1 - x0, axis=1)
    np.testing.assert_allclose(np.abs(g.curvature), kappa, rtol=1e-7)


def test_sphere_3d_summary():
    s = geometric_summary(Ellipsoid((3.0, 3.0, 3.0)))
    assert s.volume == pytest.approx(36 * math.pi, rel=1e-12)
    assert s.surface == pytest.approx(36 * math.pi, rel=1e-12)
    assert s.r_i == pytest.approx(3.0) and math.isinf(s.r_e) and s.mean_convex


def test_ball_curvature_high_dim():
    for N in (3, 4, 5):
        g = boundary_grid(Ellipsoid((2.0,) * N))
        np.testing.assert_allclose(g.curvature, 0.5, atol=1e-12)
        assert g.weights.sum() == pytest.approx(N * unit_ball_volume(N) * 2.0 ** (N - 1),
                                                rel=1e-12)


def test_ellipse_summary():
    s = geometric_summary(Ellipsoid((2.0, 1.0)))
    assert s.r_i == pytest.approx(0.5) and s.diameter == pytest.approx(4.0)
    assert s.volume == pytest.approx(2 * math.pi, rel=1e-12)


def test_fourier_ellipse_summary_matches_closed_form():
    s = geometric_summary(ellipse_as_fourier(2.0, 1.0, 64))
    assert s.r_i == pytest.approx(0.5, rel=1e-8)
    assert s.diameter == pytest.approx(4.0, rel=1e-10)
    assert s.convex and not s.estimated


def test_nonconvex_flagged_estimated():
    s = geometric_summary(Fourier2D((1.0, 0, 0, 0, 0.12)))
    assert not s.convex and s.estimated
    assert 0 < s.r_i <= s.diameter / 2 and s.r_e > 0


def test_volume_grid_disk_and_ellipse():
    vg = volume_grid(Ellipsoid((1.0, 1.0)))
    assert vg.weights.sum() == pytest.approx(math.pi, abs=1e-10)
    np.testing.assert_allclose(vg.distance, 1 - np.linalg.norm(vg.nodes, axis=1), atol=1e-13)
    vg2 = volume_grid(Ellipsoid((2.0, 1.0)))
    assert vg2.weights.sum() == pytest.approx(2 * math.pi, abs=1e-8)
    assert np.all(vg2.distance > 0) and np.all(vg2.distance <= 2.0)


def test_distance_is_a_true_projection():
    d = Fourier2D((1.0, 0.0, 0.08, 0.0, 0.03), (0.0, 0.05))
    vg = volume_grid(d, 16, 32)
    dense = boundary_grid(d, 4096).nodes
    brute = np.min(np.linalg.norm(vg.nodes[:, None, :] - dense[None, :, :], axis=2), axis=1)
    # never worse than a dense node sample
    assert np.all(vg.distance <= brute + 1e-12)
    x, dist = closest_boundary_points(d, vg.nodes)
    np.testing.assert_allclose(dist, vg.distance, rtol=1e-12)
    # foot points lie on the curve and y - x is normal there
    t = np.arctan2(x[:, 1], x[:, 0])
    xx, nu = boundary_frame(d, t[:, None])
    np.testing.assert_allclose(xx, x, atol=1e-12)
    r = vg.nodes - x
    cross = r[:, 0] * nu[:, 1] - r[:, 1] * nu[:, 0]
    assert np.max(np.abs(cross)) <= 1e-10
    assert np.all(np.sum(r * nu, axis=1) < 0)  # inside: opposite to the outward normal


def test_ellipsoid_distance_matches_sample_3d():
    d = Ellipsoid((1.5, 1.0, 0.7))
    pts = np.array([[0.0, 0.0, 0.0], [0.3, 0.2, 0.1], [0.9, -0.3, 0.2]])
    dist = distance_to_boundary(d, pts)
    assert dist[0] == pytest.approx(0.7, rel=1e-14)
    dense = boundary_grid(d, 256).nodes
    brute = np.min(np.linalg.norm(pts[:, None, :] - dense[None, :, :], axis=2), axis=1)
    assert np.all(dist <= brute + 1e-12)
    np.testing.assert_allclose(dist, brute, atol=1e-3)


def test_radii_about():
    disk = Ellipsoid((1.0, 1.0))
    assert radii_about(disk, [0, 0]) == pytest.approx((1, 1))
    assert radii_about(disk, [0.5, 0]) == pytest.approx((0.5, 1.5))
    assert radii_about(Ellipsoid((2.0, 1.0)), [0, 0]) == pytest.approx((1, 2))
    with pytest.raises(CenterOutsideDomain):
        radii_about(disk, [2, 0])


def test_fourier_radii_about():
    f = Fourier2D((1.0,))
    assert radii_about(f, [0.5, 0]) == pytest.approx((0.5, 1.5), abs=1e-12)


def test_quadrature_converges_with_order():
    d = Fourier2D((1.0, 0.0, 0.1, 0.0, 0.05))
    ref = boundary_grid(d, 1024).weights.sum()
    errs = [abs(boundary_grid(d, n).weights.sum() - ref) / ref for n in (16, 32, 64, 128)]
    assert errs[-1] <= 1e-8
    assert all(b <= a or b < 1e-14 for a, b in zip(errs, errs[1:]))


def test_grid_order_validation():
    with pytest.raises(ValueError):
        boundary_grid(Ellipsoid((1.0, 1.0)), 4)
    with pytest.raises(ValueError):
        volume_grid(Ellipsoid((1.0, 1.0)), 4, 16)


def test_grids_are_read_only():
    g = boundary_grid(Ellipsoid((1.0, 1.0)), 16)
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 3.0


def test_ellipse_as_fourier_adaptive_truncation():
    for a in (2.0, 1.5, 1.1):
        dom = ellipse_as_fourier(a, 1.0)
        x = boundary_grid(dom).nodes
        assert np.abs(x[:, 0] ** 2 / a ** 2 + x[:, 1] ** 2 - 1).max() <= 1e-14
