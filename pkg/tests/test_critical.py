import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indexcurv.critical import (OK, AmbiguousLink, CriticalSet, DegenerateCritical, SolverOptions,
                                boundary_scan, find_critical_points, hessian_index, hessian_sign,
                                link_index, pair_rows, solve, solve_batch, solve_product)
from indexcurv.geometry import (PolygonDomain, ProductSpace, SphericalPolygon, plane_chart,
                                sphere_surface, torus_surface)
from indexcurv.morse import (CallableFunction, HeightFunctions, make_combined, restrict_height,
                             sample_directions, sample_dummy_points, stream)
from indexcurv.scenarios import cap_holes


def test_sphere_height_has_min_and_max():
    surf = sphere_surface()
    h = restrict_height(np.array([0.0, 0.0, 1.0]), surf)
    pts = find_critical_points(h, surf)
    assert sorted(p.morse_index for p in pts) == [0, 2]
    assert sum(p.index for p in pts) == 2
    zs = sorted(surf.chart.embed(p.location)[2] for p in pts)
    assert zs == pytest.approx([-1.0, 1.0], abs=1e-10)


def test_torus_tilted_height_has_four_points():
    surf = torus_surface(2.0, 1.0)
    a = np.array([0.3, 0.1, 1.0])
    h = restrict_height(a / np.linalg.norm(a), surf)
    pts = find_critical_points(h, surf)
    assert len(pts) == 4
    assert sorted(p.index for p in pts) == [-1, -1, 1, 1]
    for p in pts:
        assert hessian_index(h, p) == p.index
        assert link_index(h, p.location, surf.chart, 0.05) == p.index


def test_link_index_model_functions():
    saddle = CallableFunction(lambda P: 2 * P[..., 0] ** 2 - P[..., 1] ** 2 + 0.3 * P[..., 0] * P[..., 1])
    bowl = CallableFunction(lambda P: P[..., 0] ** 2 + P[..., 1] ** 2)
    cap = CallableFunction(lambda P: -P[..., 0] ** 2 - P[..., 1] ** 2)
    # rotated so its zero rays miss the equally spaced link samples
    c, s = math.cos(0.1), math.sin(0.1)
    monkey = CallableFunction(lambda P: c * (P[..., 0] ** 3 - 3 * P[..., 0] * P[..., 1] ** 2)
                              - s * (3 * P[..., 0] ** 2 * P[..., 1] - P[..., 1] ** 3))
    o = np.zeros(2)
    assert link_index(saddle, o, None, 0.1) == -1
    assert link_index(bowl, o, None, 0.1) == 1
    assert link_index(cap, o, None, 0.1) == 1
    assert link_index(monkey, o, None, 0.1) == -2
    with pytest.raises(DegenerateCritical):
        hessian_index(monkey, o)
    flat = CallableFunction(lambda P: 0.0 * P[..., 0])
    with pytest.raises(AmbiguousLink):
        link_index(flat, o, None, 0.1)


def test_hessian_sign_any_size():
    assert hessian_sign(np.diag([1.0, 2.0, 3.0, 4.0])) == 1
    assert hessian_sign(np.diag([1.0, -2.0, 3.0, 4.0])) == -1
    assert hessian_sign(np.diag([-1.0, -2.0, 3.0, 4.0])) == 1
    with pytest.raises(DegenerateCritical):
        hessian_sign(np.diag([1.0, 1e-12, 3.0, 4.0]))


def test_flat_triangle_boundary_atoms():
    poly = PolygonDomain([(0, 0), (1, 0), (0, math.sqrt(3))])
    chart = plane_chart((-1, -1), (2, 3))
    # angles clear of the edge normals (0, pi/6, pi/2, pi, 7pi/6, 3pi/2), where edges tie
    for theta in (0.3, 1.0, 1.9, 2.6, 3.4, 4.0, 4.4, 5.1, 5.9):
        a = np.array([math.cos(theta), math.sin(theta)])
        atoms = boundary_scan(HeightFunctions(chart, a), poly)
        assert sum(p.index for p in atoms) == 1
        # for a linear function the only atom is the minimising vertex
        assert [p.kind for p in atoms] == ["vertex"]
        assert int(np.argmin(poly.vertices @ a)) == atoms[0].feature


def _batch(surf_chart, m, n, seed):
    return HeightFunctions(surf_chart, sample_directions(stream(seed, 1), m, n))


@pytest.mark.parametrize("make, chi", [
    (lambda: sphere_surface(), 2),
    (lambda: torus_surface(2.0, 1.0), 0),
    (lambda: torus_surface(3.0, 0.5), 0),
])
def test_closed_surfaces_certified(make, chi):
    surf = make()
    res = solve_batch(_batch(surf.chart, 3, 256, 11), surf)
    assert np.all(res.status == OK)
    assert np.all(res.sums == chi)
    assert res.disagreements == 0 and res.checked > 0


@pytest.mark.parametrize("p", [0, 1, 2])
def test_cap_with_holes_certified(p):
    region = cap_holes(p)
    res = solve_batch(_batch(sphere_surface().chart, 3, 256, 12 + p), region)
    ok = res.status == OK
    assert ok.mean() > 0.99
    assert np.all(res.sums[ok] == 1 - p)


def test_spherical_octant_certified():
    tri = SphericalPolygon(np.eye(3))
    res = solve_batch(_batch(sphere_surface().chart, 3, 512, 5), tri)
    ok = res.status == OK
    assert ok.mean() > 0.99 and np.all(res.sums[ok] == 1)


def test_solve_single_and_options():
    surf = sphere_surface()
    res = solve(restrict_height(np.array([0.6, 0.0, 0.8]), surf), surf)
    assert res.sums[0] == 2
    with pytest.raises(KeyError):
        SolverOptions.from_dict({"grid": 10})
    with pytest.raises(ValueError):
        SolverOptions(grid_n=8)
    r = SolverOptions().refined()
    assert (r.grid_n, r.scan_n, r.link_radius) == (32, 128, 0.025)


def test_product_sums_are_products():
    space = ProductSpace([sphere_surface(), torus_surface()])
    n = 64
    A = [sample_directions(stream(2, k), space.ambient_dim, n) for k in range(2)]
    W = sample_dummy_points(stream(2, 9), space, 2, n)
    res = solve_product(make_combined(A, W, space), space)
    assert np.all(res.status == OK) and np.all(res.sums == 0)
    s1, s2 = (b.sums for b in res.blocks)
    assert np.all(s1 == 2) and np.all(s2 == 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), max_size=12), st.lists(st.integers(0, 5), max_size=12))
def test_pair_rows_matches_brute_force(a, b):
    a, b = np.array(a, np.int64), np.array(b, np.int64)
    i, j, s = pair_rows(a, b, 6)
    got = sorted(zip(i.tolist(), j.tolist()))
    want = sorted((x, y) for x in range(len(a)) for y in range(len(b)) if a[x] == b[y])
    assert got == want
    assert np.all(a[i] == s) and np.all(b[j] == s)


def test_critical_set_roundtrip():
    cs = CriticalSet(sample=[2, 0, 2], loc=[[0, 0], [1, 1], [2, 2]], index=[1, -1, 1])
    assert cs.index_sums(3).tolist() == [-1, 0, 2]
    assert cs.sorted().sample.tolist() == [0, 2, 2]
    both = CriticalSet.concat([cs, CriticalSet.empty()])
    assert len(both) == 3 and len(cs.take([0])) == 1
    assert CriticalSet.empty().loc.shape == (0, 2)
