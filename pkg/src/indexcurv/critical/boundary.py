"""Boundary critical points: edges (1D critical points of h on a boundary
curve) and vertices."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import CapWithHoles, PolygonDomain, SphericalPolygon
from .points import EDGE, VERTEX, CriticalSet

BISECT_ITERS = 60


class BoundaryCurves:
    """Parametrized boundary curves of a region.

    Flat polygon edges use the fraction ``s`` in [0, 1], spherical edges arc
    length, cap circles the angle (periodic).
    """

    def __init__(self, dom):
        self.dom = dom
        if isinstance(dom, PolygonDomain):
            self.space = "param"
            self.ranges = [(0.0, 1.0, False)] * dom.n_vertices
        elif isinstance(dom, SphericalPolygon):
            self.space = "ambient"
            self.ranges = [(0.0, float(L), False) for L in dom.edge_lengths]
        elif isinstance(dom, CapWithHoles):
            self.space = "ambient"
            self.ranges = [(0.0, 2 * math.pi, True)] * len(dom.circles)
        else:
            raise TypeError(f"{type(dom).__name__} has no boundary")
        self.n_vertices = 0 if isinstance(dom, CapWithHoles) else dom.n_vertices

    def point(self, k, s):
        dom = self.dom
        if isinstance(dom, PolygonDomain):
            return dom.edge_point(k, s)
        if isinstance(dom, SphericalPolygon):
            return dom.edge_point(k, s)
        return dom.circle_point(k, s)

    def tangent(self, k, s):
        dom = self.dom
        s = np.asarray(s, dtype=float)
        if isinstance(dom, PolygonDomain):
            return np.broadcast_to(dom.edge_vectors[k], s.shape + (2,))
        if isinstance(dom, SphericalPolygon):
            return dom.edge_tangent(k, s)
        return dom.circle_tangent(k, s)

    def deriv(self, h, k, s, idx):
        """d/ds of h along curve ``k``; ``s`` and ``idx`` broadcast together."""
        X = self.point(k, s)
        T = self.tangent(k, s)
        if self.space == "param":
            return (h.grad(X, idx) * T).sum(-1)
        return (h.A[idx] * T).sum(-1)

    def value(self, h, X, idx):
        if self.space == "param":
            return h.value(X, idx)
        return h.ambient_value(X, idx)

    def vertex_points(self):
        return self.dom.vertices

    def canonical(self, X):
        """Histogram coordinates: the parameters themselves, or sphere lat-long."""
        if self.space == "param":
            return X
        from .finder import unit_sphere
        return unit_sphere().locate(X)


def edge_critical(h, dom, rows, scan_n):
    """Dense scan + bisection for 1D critical points on every boundary curve."""
    curves = BoundaryCurves(dom)
    parts = []
    B = len(rows)
    for k, (lo, hi, periodic) in enumerate(curves.ranges):
        if periodic:
            S = lo + (hi - lo) * np.arange(scan_n + 1) / scan_n
        else:
            S = np.linspace(lo, hi, scan_n + 1)
        D = curves.deriv(h, k, np.broadcast_to(S, (B, len(S))),
                         np.broadcast_to(rows[:, None], (B, len(S))))
        left, right = D[:, :-1], D[:, 1:]
        br = (left * right < 0) | (left == 0.0)
        if not periodic:
            br[:, 0] &= left[:, 0] != 0.0      # a zero at the vertex itself is measure zero
        b, j = np.nonzero(br)
        if not len(b):
            continue
        a_lo, a_hi = S[j].copy(), S[j + 1].copy()
        d_lo = D[b, j]
        idx = rows[b]
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (a_lo + a_hi)
            dm = curves.deriv(h, k, mid, idx)
            same = np.sign(dm) == np.sign(d_lo)
            a_lo = np.where(same, mid, a_lo)
            a_hi = np.where(same, a_hi, mid)
        s = 0.5 * (a_lo + a_hi)
        if periodic:
            s = np.mod(s, hi - lo)
        X = curves.point(k, s)
        parts.append(CriticalSet(
            sample=idx, loc=curves.canonical(X), amb=X if curves.space == "ambient" else None,
            value=curves.value(h, X, idx), kind=np.full(len(b), EDGE),
            feature=np.full(len(b), k), edge_s=s, cloc=X[:, :2]))
    return CriticalSet.concat(parts) if parts else None


def vertex_points(h, dom, rows):
    """Every vertex for every sample (indices are assigned by the link)."""
    curves = BoundaryCurves(dom)
    nv = curves.n_vertices
    if nv == 0:
        return None
    B = len(rows)
    V = curves.vertex_points()
    b = np.repeat(np.arange(B), nv)
    v = np.tile(np.arange(nv), B)
    X = V[v]
    return CriticalSet(sample=rows[b], loc=curves.canonical(X), amb=X if curves.space == "ambient" else None,
                       value=curves.value(h, X, rows[b]), kind=np.full(len(b), VERTEX),
                       feature=v, cloc=X[:, :2])


# --- distances to the boundary features ----------------------------------------

def _segment_distance(P, A, D):
    t = np.clip(((P - A) @ D) / (D @ D), 0.0, 1.0)
    return np.linalg.norm(P - (A + t[..., None] * D), axis=-1)


def curve_distances(dom, X):
    """(n, n_curves) distances (lower bounds on the sphere) to each boundary curve."""
    if isinstance(dom, PolygonDomain):
        return np.stack([_segment_distance(X, dom.vertices[e], dom.edge_vectors[e])
                         for e in range(dom.n_vertices)], -1)
    if isinstance(dom, SphericalPolygon):
        return np.arcsin(np.clip(np.abs(X @ dom.edge_normals.T), 0.0, 1.0))
    cols = [np.abs(np.arccos(np.clip(X @ c, -1.0, 1.0)) - rho) for c, rho, _ in dom.circles]
    return np.stack(cols, -1)


def feature_clearance(dom, X, kind, feature):
    """Distance from each point to the boundary curves it does not lie on."""
    d = curve_distances(dom, X)
    n, m = d.shape
    rows = np.arange(n)
    own = np.zeros_like(d, dtype=bool)
    e = kind == EDGE
    own[rows[e], feature[e]] = True
    v = kind == VERTEX
    if v.any() and not isinstance(dom, CapWithHoles):
        own[rows[v], feature[v]] = True
        own[rows[v], (feature[v] - 1) % m] = True
    return np.where(own, np.inf, d).min(-1)
