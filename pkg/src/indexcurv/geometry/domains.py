"""Domains on which critical points are sought.

Two families:

* closed surfaces (:class:`ClosedSurface`), covered by an atlas of chart
  pieces; critical points are located in the canonical chart;
* regions with boundary: flat polygons in a chart's parameter plane
  (:class:`PolygonDomain`) and regions on the unit sphere
  (:class:`SphericalPolygon`, :class:`CapWithHoles`).  Boundary curves are
  oriented with the region on their left.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import charts as _charts

TWO_PI = 2.0 * math.pi


class NonConvexVertexWarning(UserWarning):
    """A polygon vertex has interior angle >= pi; its normal cone is empty."""


@dataclass(frozen=True)
class TopologyInfo:
    euler_char: int
    has_boundary: bool = False
    genus: int | None = None
    holes: int | None = None

    @staticmethod
    def product(parts):
        chi = 1
        for t in parts:
            chi *= t.euler_char
        return TopologyInfo(chi, any(t.has_boundary for t in parts))


# --- closed surfaces ---------------------------------------------------------

@dataclass
class ChartPiece:
    """One atlas piece: Newton seeds are drawn from ``seed_radius`` of it."""
    chart: _charts.Chart
    seed_filter: object = None  # callable P -> bool mask, or None

    def seeds(self, n):
        P = self.chart.grid(n)
        ok = np.ones(P.shape[:-1], dtype=bool)
        if self.seed_filter is not None:
            ok = self.seed_filter(P)
        return P, ok


@dataclass
class ClosedSurface:
    name: str
    chart: _charts.Chart
    pieces: list
    locate: object
    topology: TopologyInfo
    params: dict = field(default_factory=dict)

    @property
    def ambient_dim(self):
        return self.chart.ambient_dim

    @property
    def ambient_diameter(self):
        P = self.chart.grid(32).reshape(-1, 2)
        Y = self.chart.embed(P)
        return float(np.linalg.norm(Y.max(axis=0) - Y.min(axis=0)))


def ellipsoid_surface(a=1.0, b=1.0, c=1.0, name=None):
    """Latitude band plus two polar graph caps; canonical chart is lat-long."""
    band = _charts.ellipsoid_chart(a, b, c, name=name)
    band_lat = math.pi / 3.0
    cap_r = math.cos(math.radians(50.0))
    pieces = [
        ChartPiece(band, lambda P: np.abs(P[..., 1]) <= band_lat),
        ChartPiece(_charts.ellipsoid_cap_chart(a, b, c, 1.0),
                   lambda P: np.hypot(P[..., 0], P[..., 1]) <= cap_r),
        ChartPiece(_charts.ellipsoid_cap_chart(a, b, c, -1.0),
                   lambda P: np.hypot(P[..., 0], P[..., 1]) <= cap_r),
    ]

    def locate(Y):
        return _charts.ellipsoid_locate(Y, a, b, c)

    return ClosedSurface(band.name, band, pieces, locate, TopologyInfo(2, genus=0),
                         params={"a": float(a), "b": float(b), "c": float(c)})


def sphere_surface():
    return ellipsoid_surface(1.0, 1.0, 1.0, name="sphere")


def torus_surface(R=2.0, r=1.0):
    chart = _charts.torus_chart(R, r)

    def locate(Y):
        return _charts.torus_locate(Y, R, r)

    return ClosedSurface("torus", chart, [ChartPiece(chart)], locate,
                         TopologyInfo(0, genus=1), params={"R": float(R), "r": float(r)})


def ellipsoid_gauss_curvature(Y, a, b, c):
    """Closed form K = 1 / (a b c)^2 / (x^2/a^4 + y^2/b^4 + z^2/c^4)^2."""
    Y = np.asarray(Y, dtype=float)
    q = Y[..., 0] ** 2 / a ** 4 + Y[..., 1] ** 2 / b ** 4 + Y[..., 2] ** 2 / c ** 4
    return 1.0 / ((a * b * c) ** 2 * q * q)


# --- flat polygons -----------------------------------------------------------

def _turn_angle(t_from, t_to, normal=None):
    """CCW angle in [0, 2pi) from ``t_from`` to ``t_to`` (about ``normal`` in 3D)."""
    if normal is None:
        s = t_from[0] * t_to[1] - t_from[1] * t_to[0]
    else:
        s = float(np.dot(np.cross(t_from, t_to), normal))
    c = float(np.dot(t_from, t_to))
    return math.atan2(s, c) % TWO_PI


class PolygonDomain:
    """Simple polygon in a chart parameter plane, stored counter-clockwise."""

    space = "param"

    def __init__(self, vertices, angles=None, name="polygon"):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise ValueError("polygon needs at least three 2D vertices")
        signed = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
        if abs(signed) < 1e-14:
            raise ValueError("degenerate polygon")
        self.reversed = signed < 0
        if self.reversed:
            V = V[::-1].copy()
        self.vertices = V
        self.name = name
        n = len(V)
        self.edge_vectors = np.roll(V, -1, axis=0) - V
        self.edge_lengths = np.linalg.norm(self.edge_vectors, axis=1)
        if np.any(self.edge_lengths < 1e-14):
            raise ValueError("repeated polygon vertex")
        _check_simple(V)
        ang = np.empty(n)
        for i in range(n):
            t_next = self.edge_vectors[i] / self.edge_lengths[i]
            t_prev = -self.edge_vectors[i - 1] / self.edge_lengths[i - 1]
            ang[i] = _turn_angle(t_next, t_prev)
        self.angles = ang
        if angles is not None:
            given = np.asarray(angles, dtype=float)
            if self.reversed:
                given = given[::-1]
            if given.shape != ang.shape or np.max(np.abs(given - ang)) > 1e-9:
                raise ValueError("interior angles inconsistent with vertex coordinates")
        if np.any(ang <= 0.0) or np.any(ang >= TWO_PI):
            raise ValueError("interior angles must lie in (0, 2pi)")
        self.topology = TopologyInfo(1, has_boundary=True)
        d = V[:, None, :] - V[None, :, :]
        self.diameter = float(np.sqrt((d ** 2).sum(-1)).max())
        self._normals = np.stack([-self.edge_vectors[:, 1], self.edge_vectors[:, 0]], axis=1)
        self._normals /= self.edge_lengths[:, None]

    @property
    def n_vertices(self):
        return len(self.vertices)

    def edge_point(self, e, s):
        """Point at fraction ``s`` in [0, 1] along edge ``e``."""
        s = np.asarray(s, dtype=float)
        return self.vertices[e] + s[..., None] * self.edge_vectors[e]

    def contains(self, P, pad=0.0):
        """Point-in-polygon (even-odd); ``pad`` shrinks by distance to boundary."""
        P = np.asarray(P, dtype=float)
        x, y = P[..., 0], P[..., 1]
        inside = np.zeros(P.shape[:-1], dtype=bool)
        V = self.vertices
        for i in range(len(V)):
            x0, y0 = V[i]
            x1, y1 = V[(i + 1) % len(V)]
            cond = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cond & (x < xc)
        if pad > 0.0:
            inside &= self.boundary_distance(P) > pad
        return inside

    def boundary_distance(self, P):
        P = np.asarray(P, dtype=float)
        best = np.full(P.shape[:-1], np.inf)
        for e in range(self.n_vertices):
            A = self.vertices[e]
            D = self.edge_vectors[e]
            t = np.clip(((P - A) @ D) / (D @ D), 0.0, 1.0)
            Q = A + t[..., None] * D
            best = np.minimum(best, np.linalg.norm(P - Q, axis=-1))
        return best

    def area(self):
        V = self.vertices
        return 0.5 * float(np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1]))


def _check_simple(V):
    n = len(V)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    for i in range(n):
        a, b = V[i], V[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = V[j], V[(j + 1) % n]
            d1, d2 = cross(a, b, c), cross(a, b, d)
            d3, d4 = cross(c, d, a), cross(c, d, b)
            if d1 * d2 < 0 and d3 * d4 < 0:
                raise ValueError("polygon boundary self-intersects")


def normal_cone_mass(poly, vertex_index):
    """Probability that ``a . x`` over the polygon is minimised at the vertex.

    For a uniform unit direction ``a`` this is the normal-cone measure
    (pi - angle) / (2 pi).  Reflex or straight vertices have an empty cone and
    get 0; reflex ones also raise :class:`NonConvexVertexWarning`.
    """
    alpha = float(poly.angles[_user_index(poly, vertex_index)])
    if alpha > math.pi + 1e-12:
        warnings.warn(f"vertex {vertex_index} is reflex (angle {alpha:.6g})",
                      NonConvexVertexWarning, stacklevel=2)
        return 0.0
    return max(math.pi - alpha, 0.0) / TWO_PI


def alpha_over_pi_weight(poly, vertex_index):
    """angle / pi: the alternative vertex weighting kept for reporting only."""
    return float(poly.angles[_user_index(poly, vertex_index)]) / math.pi


def _user_index(poly, i):
    """Map a vertex index in the caller's order onto the stored CCW order."""
    n = poly.n_vertices
    i = int(i) % n
    return (n - 1 - i) if getattr(poly, "reversed", False) else i


# --- spherical regions -------------------------------------------------------

def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def tangent_toward(p, q):
    """Unit tangent at ``p`` of the great circle through ``q``."""
    t = q - np.dot(p, q) * p
    return t / np.linalg.norm(t)


class SphericalPolygon:
    """Convex polygon on the unit sphere with great-circle edges, stored CCW
    as seen from outside."""

    space = "ambient"

    def __init__(self, vertices, name="spherical_polygon"):
        V = _unit(np.asarray(vertices, dtype=float))
        if V.ndim != 2 or V.shape[1] != 3 or len(V) < 3:
            raise ValueError("spherical polygon needs at least three unit 3-vectors")
        if np.dot(np.cross(V[0], V[1]), V[2]) < 0:
            V = V[::-1].copy()
            self.reversed = True
        else:
            self.reversed = False
        self.vertices = V
        self.name = name
        n = len(V)
        self.edge_normals = np.array([_unit(np.cross(V[i], V[(i + 1) % n])) for i in range(n)])
        for i in range(n):
            for j in range(n):
                if np.dot(self.edge_normals[i], V[j]) < -1e-12:
                    raise ValueError("spherical polygon must be convex")
        self.edge_lengths = np.array([math.acos(np.clip(np.dot(V[i], V[(i + 1) % n]), -1, 1))
                                      for i in range(n)])
        self.edge_tangents = np.array([tangent_toward(V[i], V[(i + 1) % n]) for i in range(n)])
        ang = np.empty(n)
        for i in range(n):
            t_next = tangent_toward(V[i], V[(i + 1) % n])
            t_prev = tangent_toward(V[i], V[i - 1])
            ang[i] = _turn_angle(t_next, t_prev, V[i])
        self.angles = ang
        self.topology = TopologyInfo(1, has_boundary=True)
        self.diameter = float(max(math.acos(np.clip(np.dot(a, b), -1, 1)) for a in V for b in V))

    @property
    def n_vertices(self):
        return len(self.vertices)

    def edge_point(self, e, s):
        """Point at arc length ``s`` along edge ``e``."""
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * self.vertices[e] + np.sin(s) * self.edge_tangents[e]

    def edge_tangent(self, e, s):
        s = np.asarray(s, dtype=float)[..., None]
        return -np.sin(s) * self.vertices[e] + np.cos(s) * self.edge_tangents[e]

    def signed(self, Y):
        """>= 0 inside; a lower bound on the distance to the boundary."""
        Y = np.asarray(Y, dtype=float)
        return np.arcsin(np.clip(Y @ self.edge_normals.T, -1, 1)).min(axis=-1)

    def contains(self, Y, pad=0.0):
        return self.signed(Y) > pad

    def boundary_distance(self, Y):
        return self.signed(Y)

    def area(self):
        """Area by fan triangulation and the Oosterom-Strackee formula."""
        V = self.vertices
        total = 0.0
        for i in range(1, len(V) - 1):
            total += spherical_triangle_area(V[0], V[i], V[i + 1])
        return total

    def angle_excess(self):
        return float(self.angles.sum() - (len(self.vertices) - 2) * math.pi)


def spherical_triangle_area(a, b, c):
    """Solid angle of the triangle (Oosterom-Strackee), independent of its angles."""
    num = abs(float(np.dot(a, np.cross(b, c))))
    den = 1.0 + float(np.dot(a, b) + np.dot(b, c) + np.dot(c, a))
    return 2.0 * math.atan2(num, den)


class CapWithHoles:
    """Spherical cap ``{y : y_z >= cos(cap)}`` minus ``p`` open round holes."""

    space = "ambient"

    def __init__(self, cap=1.0, holes=(), name="cap_with_holes"):
        self.cap = float(cap)
        if not (0.0 < self.cap < math.pi):
            raise ValueError("cap angle must lie in (0, pi)")
        self.hole_centers = np.array([_unit(c) for c, _ in holes]).reshape(-1, 3)
        self.hole_radii = np.array([float(r) for _, r in holes])
        self.name = name
        for j, (c, r) in enumerate(zip(self.hole_centers, self.hole_radii)):
            colat = math.acos(np.clip(c[2], -1, 1))
            if r <= 0 or colat + r >= self.cap:
                raise ValueError(f"hole {j} does not lie inside the cap")
            for k in range(j):
                gap = math.acos(np.clip(np.dot(c, self.hole_centers[k]), -1, 1))
                if gap <= r + self.hole_radii[k]:
                    raise ValueError(f"holes {k} and {j} overlap")
        p = len(self.hole_radii)
        self.topology = TopologyInfo(1 - p, has_boundary=True, holes=p)
        self.diameter = 2.0 * self.cap
        # boundary circles: (center, angular radius, orientation sign)
        self.circles = [(np.array([0.0, 0.0, 1.0]), self.cap, 1.0)]
        self.circles += [(c, r, -1.0) for c, r in zip(self.hole_centers, self.hole_radii)]
        self._frames = []
        for c, _, _ in self.circles:
            e1 = np.cross(c, [1.0, 0.0, 0.0] if abs(c[0]) < 0.9 else [0.0, 1.0, 0.0])
            e1 = _unit(e1)
            self._frames.append((e1, np.cross(c, e1)))

    @property
    def n_holes(self):
        return len(self.hole_radii)

    def circle_point(self, k, s):
        """Point at angle ``s`` on boundary circle ``k`` (region on the left)."""
        c, rho, o = self.circles[k]
        e1, e2 = self._frames[k]
        s = np.asarray(s, dtype=float)[..., None]
        return math.cos(rho) * c + math.sin(rho) * (np.cos(s) * e1 + o * np.sin(s) * e2)

    def circle_tangent(self, k, s):
        c, rho, o = self.circles[k]
        e1, e2 = self._frames[k]
        s = np.asarray(s, dtype=float)[..., None]
        return math.sin(rho) * (-np.sin(s) * e1 + o * np.cos(s) * e2)

    def signed(self, Y):
        Y = np.asarray(Y, dtype=float)
        out = np.arccos(np.clip(Y[..., 2], -1, 1))
        s = self.cap - out
        for c, r in zip(self.hole_centers, self.hole_radii):
            s = np.minimum(s, np.arccos(np.clip(Y @ c, -1, 1)) - r)
        return s

    def contains(self, Y, pad=0.0):
        return self.signed(Y) > pad

    def boundary_distance(self, Y):
        return self.signed(Y)


# --- products ----------------------------------------------------------------

@dataclass
class ProductSpace:
    factors: list

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("a product needs at least one factor")

    @property
    def d(self):
        return len(self.factors)

    @property
    def ambient_dim(self):
        return sum(f.ambient_dim for f in self.factors)

    @property
    def dim(self):
        return 2 * self.d

    @property
    def topology(self):
        return TopologyInfo.product([f.topology for f in self.factors])

    @property
    def ambient_slices(self):
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + f.ambient_dim))
            start += f.ambient_dim
        return out

    def embed(self, Z):
        """Product embedding of concatenated factor parameters ``(..., 2d)``."""
        Z = np.asarray(Z, dtype=float)
        parts = [f.chart.embed(Z[..., 2 * k:2 * k + 2]) for k, f in enumerate(self.factors)]
        return np.concatenate(parts, axis=-1)

    def block_domain(self, k):
        return self.factors[k]


class SplitPatch:
    """The 4-box chart of :class:`SpherePatch4` split into two 2-plane blocks.

    M is the box itself; each block domain is the square ``[-delta, delta]^2``
    in chart coordinates (piecewise-linear boundary).
    """

    d = 2
    dim = 4

    def __init__(self, patch):
        self.patch = patch
        dl = patch.delta
        self.square = PolygonDomain([(-dl, -dl), (dl, -dl), (dl, dl), (-dl, dl)], name="square")
        self.topology = TopologyInfo(1, has_boundary=True)

    @property
    def ambient_dim(self):
        return self.patch.ambient_dim

    def embed(self, Z):
        return self.patch.embed(Z)

    def block_domain(self, k):
        return self.square

    @property
    def factors(self):
        return [self.square, self.square]
