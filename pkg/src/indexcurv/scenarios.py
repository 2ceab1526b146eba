"""Named experiments: geometry, function space, topology and oracles.

Every scenario knows how to draw a batch of random functions from a pair of
generators, how to solve a batch, which bins to use per factor, and the
exact expected values it can be compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import morse
from .critical import solve_batch, solve_product
from .critical.boundary import BoundaryCurves
from .expectation.histogram import BinGrid, integrate_bins
from .geometry import (CapWithHoles, ClosedSurface, PolygonDomain, ProductSpace,
                       SphericalPolygon, SpherePatch4, SplitPatch, TopologyInfo,
                       ellipsoid_surface, normal_cone_mass, alpha_over_pi_weight, plane_chart,
                       sphere_surface, torus_surface)
from .geometry.forms import area_element, gauss_curvature_brioschi, gauss_curvature_sff

TWO_PI = 2.0 * math.pi
SIGN_ZERO = 1e-6

DEFAULT_TRIANGLE = [(0.0, 0.0), (1.0, 0.0), (0.0, math.sqrt(3.0))]


class UnknownScenario(KeyError):
    pass


class InvalidParameter(ValueError):
    pass


class NonDefiniteSign(ValueError):
    pass


@dataclass
class SolveOutput:
    """Per-batch solver output in factor-wise form.

    ``factors[k]`` holds the nonzero-index atoms of factor/block ``k`` with
    ``sample`` numbering the batch rows.  Single-factor scenarios have one.
    """
    status: np.ndarray
    sums: np.ndarray
    factors: list
    disagreements: int = 0
    checked: int = 0


@dataclass
class Scenario:
    name: str
    space: object
    function_space: morse.FunctionSpace
    topology: TopologyInfo
    params: dict
    grids: list                      # BinGrid per factor
    oracles: list                    # per-factor oracle masses (or None)
    areas: list = None               # per-factor bin areas (or None)
    chart: object = None             # chart the height functions are evaluated in
    e: int | None = None             # curvature sign (None: mixed)
    default_samples: int = 10_000
    boundary: object = None          # domain with boundary (single factor)
    vertex_oracle: list | None = None
    vertex_reference: list | None = None
    edge_oracle: list | None = None
    interior_oracle: float | None = None
    notes: dict = field(default_factory=dict)
    interior_grids: list | None = None   # coarse per-factor grids for interior-atom factorization

    @property
    def d(self):
        return self.function_space.d

    @property
    def chi(self):
        return self.topology.euler_char

    # --- functions ------------------------------------------------------------------

    def draw(self, rng_dir, rng_dummy, n):
        fs = self.function_space
        A = [morse.sample_directions(rng_dir, fs.ambient_dim, n) for _ in range(fs.d)]
        if fs.kind != "combined":
            return {"A": A, "W": None}
        return {"A": A, "W": morse.sample_dummy_points(rng_dummy, self.space, fs.d, n)}

    @staticmethod
    def stack_draws(draws):
        A = [np.concatenate([d["A"][k] for d in draws]) for k in range(len(draws[0]["A"]))]
        if draws[0]["W"] is None:
            return {"A": A, "W": None}
        W = [np.concatenate([d["W"][k] for d in draws]) for k in range(len(draws[0]["W"]))]
        return {"A": A, "W": W}

    def functions(self, draw):
        if self.function_space.kind == "combined":
            return morse.make_combined(draw["A"], draw["W"], self.space)
        return morse.HeightFunctions(self.chart, draw["A"][0])

    def solve(self, fn, opts):
        if self.function_space.kind == "combined":
            res = solve_product(fn, self.space, opts)
            factors = [b.crit.take(np.flatnonzero(b.crit.index != 0)) for b in res.blocks]
            return SolveOutput(res.status, res.sums, factors,
                               sum(b.disagreements for b in res.blocks),
                               sum(b.checked for b in res.blocks))
        res = solve_batch(fn, self.space, opts)
        return SolveOutput(res.status, res.sums,
                           [res.crit.take(np.flatnonzero(res.crit.index != 0))],
                           res.disagreements, res.checked)

    def describe(self):
        return {"name": self.name, "chi": self.chi, "e": self.e, "d": self.d,
                "function_space": self.function_space.kind,
                "params": _jsonable(self.params), "bins": [list(g.shape) for g in self.grids]}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# --- oracles --------------------------------------------------------------------------

def surface_oracle(surface, grid, q=12):
    """Per-bin K dA / (2 pi) on a closed surface's canonical chart."""
    chart = surface.chart

    def dens(P):
        return gauss_curvature_sff(chart, P) * area_element(chart, P) / TWO_PI
    return integrate_bins(grid, dens, q)


def bin_areas(chart, grid, q=12):
    return integrate_bins(grid, lambda P: area_element(chart, P), q)


def torus_bin_oracle(grid):
    """Closed form (sin s1 - sin s0) (t1 - t0) / (2 pi) for the torus."""
    b = grid.bins()
    return (np.sin(b[:, 1]) - np.sin(b[:, 0])) * (b[:, 3] - b[:, 2]) / TWO_PI


def sphere_bin_oracle(grid):
    """Uniform density 2 dA / (4 pi) on lat-long bins."""
    b = grid.bins()
    return (b[:, 1] - b[:, 0]) * (np.sin(b[:, 3]) - np.sin(b[:, 2])) / TWO_PI


def region_oracle(region, grid, q=16):
    """Interior mass 2 * area(bin & region) / (4 pi) on lat-long bins of the unit sphere."""
    sphere = sphere_surface()
    chart = sphere.chart

    def dens(P):
        Y = chart.embed(P)
        return np.where(region.contains(Y), area_element(chart, P), 0.0) / TWO_PI
    return integrate_bins(grid, dens, q)


# --- catalog --------------------------------------------------------------------------

CATALOG = {}


def _entry(name, doc):
    def deco(fn):
        fn.doc = doc
        CATALOG[name] = fn
        return fn
    return deco


def _check_keys(params, allowed, name):
    bad = set(params) - set(allowed)
    if bad:
        raise InvalidParameter(f"{name}: unknown parameter(s) {sorted(bad)}")


def _bins(bins, key, default):
    return tuple(bins.get(key, default))


def _lat_long_grid(bins, default=(24, 12), lo=(0.0, -0.5 * math.pi), hi=(TWO_PI, 0.5 * math.pi),
                   periodic=(True, False)):
    nu, nv = bins.get("u", default[0]), bins.get("v", default[1])
    return BinGrid.regular(lo, hi, nu, nv, periodic)


def _closed_factor(name, params):
    if name == "sphere":
        return sphere_surface()
    if name == "torus":
        R, r = float(params.get("R", 2.0)), float(params.get("r", 1.0))
        if not (0.0 < r < R):
            raise InvalidParameter(f"torus needs 0 < r < R (got R={R}, r={r})")
        return torus_surface(R, r)
    if name == "ellipsoid":
        a, b, c = (float(params.get(k, v)) for k, v in (("a", 1.0), ("b", 1.5), ("c", 2.0)))
        if min(a, b, c) <= 0:
            raise InvalidParameter("ellipsoid semi-axes must be positive")
        return ellipsoid_surface(a, b, c)
    raise InvalidParameter(f"unknown closed factor {name!r}")


def _surface_grid_oracle(surf, bins, default):
    if surf.name == "torus":
        grid = BinGrid.regular((0.0, 0.0), (TWO_PI, TWO_PI), bins.get("u", default[0]),
                               bins.get("v", default[1]), (True, True))
        return grid, torus_bin_oracle(grid)
    grid = _lat_long_grid(bins, default)
    if surf.name == "sphere":
        return grid, sphere_bin_oracle(grid)
    return grid, surface_oracle(surf, grid)


def _height(name, surf, params, e, bins, default_bins, samples):
    grid, oracle = _surface_grid_oracle(surf, bins, default_bins)
    return Scenario(name, surf, morse.FunctionSpace("height", 3, 1, antipodal=True),
                    surf.topology, params, [grid], [oracle], [bin_areas(surf.chart, grid)],
                    chart=surf.chart, e=e, default_samples=samples)


@_entry("sphere", "round unit sphere, height functions (chi=2, e=+1)")
def _sphere(params, bins):
    _check_keys(params, (), "sphere")
    return _height("sphere", sphere_surface(), params, 1, bins, (24, 12), 100_000)


@_entry("torus", "torus of revolution R, r (chi=0, mixed sign)")
def _torus(params, bins):
    _check_keys(params, ("R", "r"), "torus")
    p = {"R": float(params.get("R", 2.0)), "r": float(params.get("r", 1.0))}
    return _height("torus", _closed_factor("torus", p), p, None, bins, (16, 16), 100_000)


@_entry("ellipsoid", "triaxial ellipsoid a, b, c (chi=2, e=+1)")
def _ellipsoid(params, bins):
    _check_keys(params, ("a", "b", "c"), "ellipsoid")
    p = {k: float(params.get(k, v)) for k, v in (("a", 1.0), ("b", 1.5), ("c", 2.0))}
    return _height("ellipsoid", _closed_factor("ellipsoid", p), p, 1, bins, (24, 12), 10_000)


@_entry("flat_polygon", "convex polygon in the plane (chi=1, e=0)")
def _flat_polygon(params, bins):
    _check_keys(params, ("vertices",), "flat_polygon")
    V = np.asarray(params.get("vertices", DEFAULT_TRIANGLE), dtype=float)
    try:
        poly = PolygonDomain(V)
    except ValueError as exc:
        raise InvalidParameter(str(exc)) from exc
    lo, hi = poly.vertices.min(0), poly.vertices.max(0)
    pad = 0.5 * (hi - lo)
    chart = plane_chart(lo - pad, hi + pad)
    grid = BinGrid.regular(lo, hi, bins.get("u", 16), bins.get("v", 16))
    n = poly.n_vertices
    order = np.arange(n)[::-1] if poly.reversed else np.arange(n)
    # report vertices in stored (counter-clockwise) order
    vo = [normal_cone_mass(poly, int(order[i])) for i in range(n)]
    vr = [alpha_over_pi_weight(poly, int(order[i])) for i in range(n)]
    return Scenario("flat_polygon", poly, morse.FunctionSpace("height", 2, 1), poly.topology,
                    {"vertices": V.tolist()}, [grid], [np.zeros(grid.size)],
                    [integrate_bins(grid, lambda P: poly.contains(P).astype(float), 16)],
                    chart=chart, e=0, default_samples=100_000, boundary=poly,
                    vertex_oracle=vo, vertex_reference=vr, edge_oracle=[0.0] * n,
                    interior_oracle=0.0)


def _region_grid(region, bins, default):
    sphere = sphere_surface()
    if isinstance(region, SphericalPolygon):
        ll = sphere.locate(region.vertices)
        probe = np.concatenate([region.edge_point(e, np.linspace(0, L, 65))
                                for e, L in enumerate(region.edge_lengths)])
        LL = sphere.locate(probe)
        u0, u1 = LL[:, 0].min(), LL[:, 0].max()
        v0, v1 = min(LL[:, 1].min(), ll[:, 1].min()), max(LL[:, 1].max(), ll[:, 1].max())
        if u1 - u0 > math.pi:              # straddles u = 0 or contains a pole
            u0, u1 = 0.0, TWO_PI
        if np.any(region.contains(np.array([[0, 0, 1.0], [0, 0, -1.0]]))):
            u0, u1 = 0.0, TWO_PI
            v1 = 0.5 * math.pi if region.contains(np.array([[0, 0, 1.0]]))[0] else v1
            v0 = -0.5 * math.pi if region.contains(np.array([[0, 0, -1.0]]))[0] else v0
        return BinGrid.regular((u0, v0), (u1, v1), bins.get("u", default[0]),
                               bins.get("v", default[1]))
    return BinGrid.regular((0.0, 0.5 * math.pi - region.cap), (TWO_PI, 0.5 * math.pi),
                           bins.get("u", default[0]), bins.get("v", default[1]), (True, False))


@_entry("spherical_triangle", "geodesic triangle on the unit sphere (chi=1, e=+1)")
def _spherical_triangle(params, bins):
    _check_keys(params, ("vertices",), "spherical_triangle")
    V = np.asarray(params.get("vertices", np.eye(3).tolist()), dtype=float)
    if V.shape != (3, 3):
        raise InvalidParameter("spherical_triangle needs three 3-vectors")
    try:
        tri = SphericalPolygon(V)
    except ValueError as exc:
        raise InvalidParameter(str(exc)) from exc
    sphere = sphere_surface()
    grid = _region_grid(tri, bins, (6, 6))
    areas = integrate_bins(grid, lambda P: np.where(tri.contains(sphere.chart.embed(P)),
                                                    area_element(sphere.chart, P), 0.0), 16)
    vo = [max(math.pi - a, 0.0) / TWO_PI for a in tri.angles]
    return Scenario("spherical_triangle", tri, morse.FunctionSpace("height", 3, 1, antipodal=True),
                    tri.topology, {"vertices": tri.vertices.tolist()}, [grid],
                    [region_oracle(tri, grid)], [areas], chart=sphere.chart, e=1,
                    default_samples=100_000, boundary=tri, vertex_oracle=vo,
                    vertex_reference=[a / math.pi for a in tri.angles], edge_oracle=[0.0] * 3,
                    interior_oracle=tri.area() / TWO_PI,
                    notes={"area": tri.area(), "angle_excess": tri.angle_excess()})


def cap_holes(p, cap=1.0, hole_radius=0.2, colatitude=None):
    """``p`` equal holes evenly spaced in longitude halfway down the cap."""
    colat = 0.5 * cap if colatitude is None else colatitude
    holes = []
    for j in range(p):
        phi = TWO_PI * j / max(p, 1)
        holes.append((np.array([math.sin(colat) * math.cos(phi), math.sin(colat) * math.sin(phi),
                                math.cos(colat)]), hole_radius))
    return CapWithHoles(cap, holes)


@_entry("cap_with_holes", "spherical cap minus p round holes (chi=1-p)")
def _cap_with_holes(params, bins):
    _check_keys(params, ("p", "cap", "hole_radius"), "cap_with_holes")
    p = int(params.get("p", 1))
    cap = float(params.get("cap", 1.0))
    hr = float(params.get("hole_radius", 0.2))
    if p < 0:
        raise InvalidParameter("p must be >= 0")
    try:
        region = cap_holes(p, cap, hr)
    except ValueError as exc:
        raise InvalidParameter(str(exc)) from exc
    sphere = sphere_surface()
    grid = _region_grid(region, bins, (12, 6))
    areas = integrate_bins(grid, lambda P: np.where(region.contains(sphere.chart.embed(P)),
                                                    area_element(sphere.chart, P), 0.0), 16)
    # boundary measure k_g ds / (2 pi) per circle: cos(cap) outside, -cos(r) per hole
    edge_oracle = [math.cos(cap)] + [-math.cos(hr)] * p
    interior = (1.0 - math.cos(cap)) - p * (1.0 - math.cos(hr))
    return Scenario("cap_with_holes", region, morse.FunctionSpace("height", 3, 1, antipodal=True),
                    region.topology, {"p": p, "cap": cap, "hole_radius": hr}, [grid],
                    [region_oracle(region, grid)], [areas], chart=sphere.chart, e=1,
                    default_samples=10_000, boundary=region, edge_oracle=edge_oracle,
                    interior_oracle=interior)


@_entry("product", "product of closed surfaces, combined functions (chi = product)")
def _product(params, bins):
    _check_keys(params, ("factors", "R", "r", "a", "b", "c"), "product")
    names = params.get("factors", ["sphere", "sphere"])
    if isinstance(names, str) or len(names) < 1:
        raise InvalidParameter("factors must be a list of closed surface names")
    if len(names) > 2:
        raise InvalidParameter("product statistics are implemented for d <= 2")
    facs = []
    for f in names:
        if isinstance(f, dict):
            facs.append(_closed_factor(f.get("name"), f.get("params", {})))
        else:
            facs.append(_closed_factor(f, params))
    space = ProductSpace(facs)
    grids, oracles, areas = [], [], []
    for f in facs:
        g, o = _surface_grid_oracle(f, bins, (16, 16))
        grids.append(g)
        oracles.append(o)
        areas.append(bin_areas(f.chart, g))
    e = 1 if all(f.topology.euler_char == 2 for f in facs) else None
    return Scenario("product", space, morse.FunctionSpace("combined", space.ambient_dim, len(facs)),
                    space.topology, {"factors": [f.name for f in facs]}, grids, oracles, areas,
                    e=e, default_samples=100_000)


@_entry("s4patch", "box patch of the round 4-sphere, d=2 combined functions (chi=1, e=+1)")
def _s4patch(params, bins):
    _check_keys(params, ("delta", "flat"), "s4patch")
    delta = float(params.get("delta", 0.2))
    flat = bool(params.get("flat", False))
    if not (0.0 < delta < 0.5):
        raise InvalidParameter("delta must lie in (0, 0.5)")
    patch = SpherePatch4(delta, flat=flat)
    space = SplitPatch(patch)
    g = BinGrid.regular((-delta, -delta), (delta, delta), bins.get("u", 16), bins.get("v", 16))
    # interior critical pairs are rare (both blocks need one), so the interior
    # factorization is tested on halves of each block
    gi = BinGrid.regular((-delta, -delta), (delta, delta), 2, 1)
    return Scenario("s4patch", space, morse.FunctionSpace("combined", patch.ambient_dim, 2),
                    space.topology, {"delta": delta, "flat": flat}, [g, g], [None, None],
                    e=0 if flat else 1, default_samples=100_000, interior_grids=[gi, gi])


def build_scenario(config):
    """Scenario from a config tree ``{"name": ..., "params": {...}}`` (or a name).

    ``config`` may also carry ``bins`` (per-factor ``u``/``v`` bin counts).
    """
    if isinstance(config, str):
        config = {"name": config}
    name = config.get("name")
    if name not in CATALOG:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(sorted(CATALOG))}")
    params = dict(config.get("params") or {})
    bins = dict(config.get("bins") or {})
    bad = set(bins) - {"u", "v", "edge", "regions"}
    if bad:
        raise InvalidParameter(f"unknown bins key(s) {sorted(bad)}")
    return CATALOG[name](params, bins)


def catalog():
    return {name: fn.doc for name, fn in sorted(CATALOG.items())}


def sectional_sign_margin(s, n_points=5, n_dummies=3):
    """Minimum Gauss curvature of coordinate 2-slices of the s4patch chart.

    Brioschi curvature of the induced metric, over a grid of slice points and
    of frozen coordinates for both blocks.  Raises :class:`NonDefiniteSign`
    when the margin is not positive (values within 1e-6 of 0 count as 0).
    """
    if s.name != "s4patch":
        raise ValueError("sectional_sign_margin applies to the s4patch scenario")
    patch = s.space.patch
    dl = patch.delta
    pts = np.linspace(-dl, dl, n_points)
    ws = np.linspace(-dl, dl, n_dummies)
    P = np.stack(np.meshgrid(pts, pts, indexing="ij"), -1).reshape(-1, 2)
    lowest = np.inf
    for slot in range(2):
        for w1 in ws:
            for w2 in ws:
                w = np.zeros(4)
                other = slice(2, 4) if slot == 0 else slice(0, 2)
                w[other] = (w1, w2)
                chart = patch.slice_chart(slot, w)
                K = np.array([gauss_curvature_brioschi(chart, p) for p in P])
                lowest = min(lowest, float(K.min()))
    if abs(lowest) < SIGN_ZERO:
        lowest = 0.0
    if lowest <= 0.0:
        raise NonDefiniteSign(f"coordinate slice curvature margin {lowest:g} <= 0")
    return lowest


def boundary_curves(s):
    return BoundaryCurves(s.boundary) if s.boundary is not None else None
