import math
import warnings

import numpy as np
import pytest

from indexcurv.geometry import (CapWithHoles, NonConvexVertexWarning, PolygonDomain, SpherePatch4,
                                SphericalPolygon, chart_area, check_immersion, ellipsoid_chart,
                                ellipsoid_surface, gauss_curvature_brioschi, gauss_curvature_sff,
                                normal_cone_mass, alpha_over_pi_weight, plane_chart,
                                spherical_triangle_area, torus_chart)


def _ellipsoid_K(Y, a, b, c):
    # independent closed form
    x, y, z = Y
    return 1.0 / (a * b * c) ** 2 / (x * x / a**4 + y * y / b**4 + z * z / c**4) ** 2


def test_areas_match_closed_forms():
    assert chart_area(ellipsoid_chart(1, 1, 1)) == pytest.approx(4 * math.pi, rel=1e-10)
    assert chart_area(torus_chart(2.0, 1.0)) == pytest.approx(4 * math.pi**2 * 2.0, rel=1e-12)
    assert chart_area(plane_chart((0, 0), (2, 3))) == pytest.approx(6.0, rel=1e-12)


def test_torus_curvature_sff_and_brioschi():
    R, r = 2.0, 1.0
    ch = torus_chart(R, r)
    rng = np.random.default_rng(0)
    for s, t in rng.uniform(0, 2 * math.pi, (10, 2)):
        exact = math.cos(s) / (r * (R + r * math.cos(s)))
        p = np.array([s, t])
        assert gauss_curvature_sff(ch, p) == pytest.approx(exact, abs=1e-12)
        assert gauss_curvature_brioschi(ch, p) == pytest.approx(exact, abs=1e-6)


def test_ellipsoid_curvature_closed_form():
    a, b, c = 1.0, 1.5, 2.0
    ch = ellipsoid_chart(a, b, c)
    rng = np.random.default_rng(1)
    P = np.stack([rng.uniform(0, 2 * math.pi, 10), rng.uniform(-1.3, 1.3, 10)], 1)
    for p in P:
        Y = ch.embed(p)
        assert gauss_curvature_sff(ch, p) == pytest.approx(_ellipsoid_K(Y, a, b, c), rel=1e-10)


def test_ellipsoid_gauss_bonnet():
    # integral of K dA over the surface is 2 pi chi = 4 pi
    ch = ellipsoid_chart(1.0, 1.5, 2.0)
    n = 96
    u = (np.arange(n) + 0.5) * 2 * math.pi / n
    x, w = np.polynomial.legendre.leggauss(n)
    v = 0.5 * math.pi * x
    U, V = np.meshgrid(u, v, indexing="ij")
    P = np.stack([U, V], -1)
    J = ch.jacobian(P)
    dA = np.linalg.norm(np.cross(J[..., 0, :], J[..., 1, :]), axis=-1)
    K = gauss_curvature_sff(ch, P)
    total = np.einsum("j,ij->", w * 0.5 * math.pi, K * dA) * 2 * math.pi / n
    assert total == pytest.approx(4 * math.pi, rel=1e-8)


def test_surface_atlas_covers_sphere():
    surf = ellipsoid_surface(1.0, 1.5, 2.0)
    Y = surf.chart.embed(np.array([[0.3, 0.2], [1.0, 1.5], [4.0, -1.55]]))
    L = surf.locate(Y)
    assert np.allclose(surf.chart.embed(L), Y, atol=1e-12)
    assert check_immersion(torus_chart())


def test_polygon_vertex_masses_30_60_90():
    poly = PolygonDomain([(0, 0), (1, 0), (0, math.sqrt(3))])
    masses = [normal_cone_mass(poly, i) for i in range(3)]
    assert masses == pytest.approx([1 / 4, 1 / 3, 5 / 12], abs=1e-12)
    assert sum(masses) == pytest.approx(1.0, abs=1e-12)
    refs = [alpha_over_pi_weight(poly, i) for i in range(3)]
    assert refs == pytest.approx([1 / 2, 1 / 3, 1 / 6], abs=1e-12)


def test_polygon_clockwise_input_keeps_caller_order():
    cw = PolygonDomain([(0, math.sqrt(3)), (1, 0), (0, 0)])
    assert cw.reversed
    assert [normal_cone_mass(cw, i) for i in range(3)] == pytest.approx([5 / 12, 1 / 3, 1 / 4])


def test_polygon_reflex_vertex_warns():
    L = PolygonDomain([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert normal_cone_mass(L, 3) == 0.0
    assert any(issubclass(w.category, NonConvexVertexWarning) for w in rec)
    # convex vertices overshoot by exactly the reflex vertex's signed turn (pi - 3pi/2) / 2pi
    convex = sum(normal_cone_mass(L, i) for i in range(6) if i != 3)
    assert convex + (math.pi - L.angles[3]) / (2 * math.pi) == pytest.approx(1.0, abs=1e-12)


def test_polygon_rejects_bad_input():
    with pytest.raises(ValueError):
        PolygonDomain([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(ValueError):
        PolygonDomain([(0, 0), (1, 1), (1, 0), (0, 1)])   # bow tie
    with pytest.raises(ValueError):
        PolygonDomain([(0, 0), (1, 0), (0, 1)], angles=[1.0, 1.0, 1.0])


def test_octant_harriot_identity():
    tri = SphericalPolygon(np.eye(3))
    assert tri.angles == pytest.approx([math.pi / 2] * 3, abs=1e-14)
    assert tri.area() == pytest.approx(math.pi / 2, abs=1e-14)
    assert abs(tri.angle_excess() - tri.area()) < 1e-9


def test_harriot_identity_random_triangles():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = rng.standard_normal(3)
        c /= np.linalg.norm(c)
        V = c + 0.6 * rng.standard_normal((3, 3))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        try:
            tri = SphericalPolygon(V)
        except ValueError:
            continue
        assert abs(tri.angle_excess() - spherical_triangle_area(*tri.vertices)) < 1e-9


def test_cap_with_holes_topology_and_validation():
    cap = CapWithHoles(1.0, [([0.4, 0.0, 1.0], 0.1), ([-0.4, 0.0, 1.0], 0.1)])
    assert cap.topology.euler_char == -1
    assert cap.contains(np.array([[0.0, 0.0, 1.0]]))[0]
    with pytest.raises(ValueError):
        CapWithHoles(1.0, [([0.0, 0.0, 1.0], 1.5)])


def test_s4patch_slices_are_positively_curved():
    patch = SpherePatch4(0.2)
    for slot in (0, 1):
        ch = patch.slice_chart(slot, np.zeros(4))
        # coordinate slice through the centre is a unit great 2-sphere
        assert gauss_curvature_brioschi(ch, np.zeros(2)) == pytest.approx(1.0, abs=1e-6)
    flat = SpherePatch4(0.2, flat=True).slice_chart(0, np.zeros(4))
    assert abs(gauss_curvature_brioschi(flat, np.array([0.05, -0.1]))) < 1e-8
    with pytest.raises(ValueError):
        SpherePatch4(0.7)
