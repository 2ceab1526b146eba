import json
import math

import numpy as np
import pytest

from indexcurv.scenarios import (InvalidParameter, NonDefiniteSign, UnknownScenario, build_scenario,
                                 catalog, sectional_sign_margin)


def test_catalog_names():
    assert set(catalog()) == {"sphere", "torus", "ellipsoid", "flat_polygon", "spherical_triangle",
                              "cap_with_holes", "product", "s4patch"}


@pytest.mark.parametrize("cfg, chi", [
    ({"name": "sphere"}, 2),
    ({"name": "torus", "params": {"R": 2, "r": 1}}, 0),
    ({"name": "ellipsoid"}, 2),
    ({"name": "flat_polygon"}, 1),
    ({"name": "spherical_triangle"}, 1),
    ({"name": "cap_with_holes", "params": {"p": 2}}, -1),
    ({"name": "product", "params": {"factors": ["sphere", "sphere"]}}, 4),
    ({"name": "product", "params": {"factors": ["sphere", "torus"]}}, 0),
    ({"name": "s4patch"}, 1),
])
def test_topology(cfg, chi):
    s = build_scenario(cfg)
    assert s.chi == chi
    json.dumps(s.describe())


def test_bad_configs():
    with pytest.raises(UnknownScenario):
        build_scenario({"name": "klein_bottle"})
    with pytest.raises(InvalidParameter):
        build_scenario({"name": "torus", "params": {"R": 1, "r": 2}})
    with pytest.raises(InvalidParameter):
        build_scenario({"name": "sphere", "params": {"R": 1}})
    with pytest.raises(InvalidParameter):
        build_scenario({"name": "sphere", "bins": {"w": 3}})
    with pytest.raises(InvalidParameter):
        build_scenario({"name": "cap_with_holes", "params": {"p": 9, "hole_radius": 0.3}})
    with pytest.raises(InvalidParameter):
        build_scenario({"name": "flat_polygon", "params": {"vertices": [[0, 0], [1, 1], [2, 2]]}})


def test_torus_bin_oracle_closed_form():
    s = build_scenario({"name": "torus", "bins": {"u": 16, "v": 16}})
    g = s.grids[0]
    # K dA / 2pi = cos(s) ds dt / 2pi on the (minor, major) angle chart
    want = np.array([(t1 - t0) * (math.sin(s1) - math.sin(s0)) / (2 * math.pi)
                     for s0, s1, t0, t1 in g.bins()])
    assert np.allclose(s.oracles[0], want, atol=1e-12)
    assert abs(s.oracles[0].sum()) < 1e-12


def test_sphere_and_ellipsoid_oracles_sum_to_chi():
    sp = build_scenario({"name": "sphere"})
    g = sp.grids[0]
    assert g.shape == (24, 12)
    want = np.array([(u1 - u0) * (math.sin(v1) - math.sin(v0)) / (2 * math.pi)
                     for u0, u1, v0, v1 in g.bins()])
    assert np.allclose(sp.oracles[0], want, atol=1e-13)
    assert build_scenario({"name": "ellipsoid"}).oracles[0].sum() == pytest.approx(2.0, abs=1e-8)


def test_octant_oracles():
    s = build_scenario({"name": "spherical_triangle"})
    assert s.interior_oracle == pytest.approx(0.25, abs=1e-14)
    assert s.vertex_oracle == pytest.approx([0.25] * 3, abs=1e-14)
    assert s.interior_oracle + sum(s.vertex_oracle) == pytest.approx(1.0, abs=1e-14)
    assert s.vertex_reference == pytest.approx([0.5] * 3)


def test_cap_oracles_balance():
    for p in (0, 1, 2):
        s = build_scenario({"name": "cap_with_holes", "params": {"p": p}})
        assert s.interior_oracle + sum(s.edge_oracle) == pytest.approx(1 - p, abs=1e-14)


def test_sectional_sign_margin():
    m = sectional_sign_margin(build_scenario({"name": "s4patch", "params": {"delta": 0.2}}))
    assert m > 0
    small = sectional_sign_margin(build_scenario({"name": "s4patch", "params": {"delta": 0.01}}))
    assert small == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(NonDefiniteSign):
        sectional_sign_margin(build_scenario({"name": "s4patch", "params": {"flat": True}}))
    with pytest.raises(ValueError):
        sectional_sign_margin(build_scenario({"name": "sphere"}))


def test_draws_are_reproducible():
    from indexcurv.morse import stream
    s = build_scenario({"name": "s4patch"})
    a = s.draw(stream(1, 1), stream(1, 2), 4)
    b = s.draw(stream(1, 1), stream(1, 2), 4)
    assert all(np.array_equal(x, y) for x, y in zip(a["A"] + a["W"], b["A"] + b["W"]))
    assert np.all(np.abs(a["W"][0]) <= 0.2)
