"""Link-index evaluation on small circles, half-circles and sectors.

The index of a critical point ``x`` of ``h`` on ``M`` is read off the link as
``1 - chi({y in S_r(x) & M : h(y) < h(x)})``.  A sublevel arc counts 1, a
sublevel full circle counts 0, so minima give +1, maxima +1, saddles -1 and
regular points 0.  Open links (edges, vertices) are sampled including their
two end points, which lie on the boundary.
"""

from __future__ import annotations

import math

import numpy as np

from .._kernels import sublevel_euler
from ..geometry import CapWithHoles, PolygonDomain, SphericalPolygon
from .points import AmbiguousLink

TIE_TOL = 1e-12
MAX_SHRINK = 5
CAP_OVERSAMPLE = 4


def _angles(K, lo=0.0, span=None):
    """(n, K) sample angles; closed circles when ``span`` is None."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    if span is None:
        t = 2.0 * math.pi * np.arange(K) / K
        return lo[:, None] + t[None, :]
    span = np.atleast_1d(np.asarray(span, dtype=float))
    t = np.arange(K) / (K - 1)
    return lo[:, None] + span[:, None] * t[None, :]


def param_circle(X, r, theta):
    """Points ``X + r (cos t, sin t)`` for angles ``theta`` of shape (n, K)."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)[:, None]
    return np.stack([X[:, None, 0] + r * np.cos(theta), X[:, None, 1] + r * np.sin(theta)], -1)


def tangent_frame(Y):
    """An orthonormal tangent frame at unit vectors ``Y`` (n, 3)."""
    Y = np.asarray(Y, dtype=float)
    ref = np.where((np.abs(Y[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    e1 = np.cross(Y, ref)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(Y, e1)


def sphere_circle(Y, E1, E2, r, theta):
    """Geodesic circle of radius ``r`` about ``Y``: exp map of ``r (cos t E1 + sin t E2)``."""
    r = np.asarray(r, dtype=float)[:, None, None]
    c, s = np.cos(theta)[..., None], np.sin(theta)[..., None]
    return np.cos(r) * Y[:, None, :] + np.sin(r) * (c * E1[:, None, :] + s * E2[:, None, :])


def count_index(values, valid, closed, h0):
    """Link index ``1 - chi`` per row and an ambiguity flag."""
    chi, amb = sublevel_euler(values, valid, closed, h0, TIE_TOL)
    return 1 - chi, amb


# --- link geometry per domain -------------------------------------------------

class LinkGeometry:
    """Where link samples live for one domain and how to evaluate ``h`` on them.

    ``space`` is ``param`` (chart coordinates) or ``ambient`` (unit sphere).
    Interior links of closed surfaces are handled by the finder directly in
    their chart pieces.
    """

    def __init__(self, dom):
        self.dom = dom
        if isinstance(dom, PolygonDomain):
            self.space = "param"
        elif isinstance(dom, (SphericalPolygon, CapWithHoles)):
            self.space = "ambient"
        else:
            raise TypeError(f"no boundary link geometry for {type(dom).__name__}")

    def evaluate(self, h, pts, idx):
        K = pts.shape[1]
        rows = np.repeat(np.asarray(idx), K).reshape(-1, K)
        if self.space == "param":
            return h.value(pts, rows)
        return h.ambient_value(pts, rows)

    def interior(self, X, r, K):
        n = len(X)
        theta = _angles(K, np.zeros(n))
        if self.space == "param":
            pts = param_circle(X, r, theta)
            return pts, np.ones((n, K), bool), np.ones(n, bool)
        E1, E2 = tangent_frame(X)
        if isinstance(self.dom, CapWithHoles):
            return self._cap_masked(X, E1, E2, r, K)
        return sphere_circle(X, E1, E2, r, theta), np.ones((n, K), bool), np.ones(n, bool)

    def edge(self, e, s, r, K):
        """Half-disk link at points ``s`` of edge (or boundary circle) ``e``."""
        e = np.asarray(e)
        n = len(e)
        dom = self.dom
        if isinstance(dom, PolygonDomain):
            X = dom.vertices[e] + s[:, None] * dom.edge_vectors[e]
            t = dom.edge_vectors[e]
            theta = _angles(K, np.arctan2(t[:, 1], t[:, 0]), np.full(n, math.pi))
            return X, param_circle(X, r, theta), np.ones((n, K), bool), np.zeros(n, bool)
        if isinstance(dom, SphericalPolygon):
            X = np.cos(s)[:, None] * dom.vertices[e] + np.sin(s)[:, None] * dom.edge_tangents[e]
            T = -np.sin(s)[:, None] * dom.vertices[e] + np.cos(s)[:, None] * dom.edge_tangents[e]
            E2 = np.cross(X, T)
            theta = _angles(K, np.zeros(n), np.full(n, math.pi))
            return X, sphere_circle(X, T, E2, r, theta), np.ones((n, K), bool), np.zeros(n, bool)
        X = np.empty((n, 3))
        for k in np.unique(e):
            sel = e == k
            X[sel] = dom.circle_point(int(k), s[sel])
        E1, E2 = tangent_frame(X)
        pts, valid, closed = self._cap_masked(X, E1, E2, r, K)
        return X, pts, valid, closed

    def vertex(self, v, r, K):
        v = np.asarray(v)
        n = len(v)
        dom = self.dom
        alpha = dom.angles[v]
        if isinstance(dom, PolygonDomain):
            X = dom.vertices[v]
            t = dom.edge_vectors[v]
            theta = _angles(K, np.arctan2(t[:, 1], t[:, 0]), alpha)
            return X, param_circle(X, r, theta), np.ones((n, K), bool), np.zeros(n, bool)
        X = dom.vertices[v]
        T = dom.edge_tangents[v]
        theta = _angles(K, np.zeros(n), alpha)
        pts = sphere_circle(X, T, np.cross(X, T), r, theta)
        return X, pts, np.ones((n, K), bool), np.zeros(n, bool)

    def _cap_masked(self, X, E1, E2, r, K):
        """Full geodesic circle masked to the region, with the boundary
        crossings moved onto the boundary by bisection."""
        dom = self.dom
        n = len(X)
        Kc = CAP_OVERSAMPLE * K
        theta = _angles(Kc, np.zeros(n))
        pts = sphere_circle(X, E1, E2, r, theta)
        valid = dom.signed(pts) > 0.0
        nxt = np.roll(valid, -1, axis=1)
        prv = np.roll(valid, 1, axis=1)
        step = 2.0 * math.pi / Kc
        # last valid sample before an exit, first valid sample after an entry
        for mask, direction in ((valid & ~nxt, 1.0), (valid & ~prv, -1.0)):
            rows, cols = np.nonzero(mask)
            if not len(rows):
                continue
            lo = theta[rows, cols]
            hi = lo + direction * step
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                p = sphere_circle(X[rows], E1[rows], E2[rows], r[rows], mid[:, None])[:, 0]
                inside = dom.signed(p) > 0.0
                lo = np.where(inside, mid, lo)
                hi = np.where(inside, hi, mid)
            pts[rows, cols] = sphere_circle(X[rows], E1[rows], E2[rows], r[rows], lo[:, None])[:, 0]
        return pts, valid, np.ones(n, bool)


def batch_link_index(evaluate, build, h0, r, max_shrink=MAX_SHRINK):
    """Link indices for a batch, shrinking ``r`` on ambiguous rows.

    ``build(rows, r)`` returns ``(pts, valid, closed)`` for those rows and
    ``evaluate(rows, pts)`` the function values.  Rows still ambiguous after
    ``max_shrink`` halvings come back flagged.
    """
    n = len(h0)
    index = np.zeros(n, dtype=np.int64)
    ambiguous = np.zeros(n, dtype=bool)
    rows = np.arange(n)
    r = np.asarray(r, dtype=float).copy()
    for attempt in range(max_shrink + 1):
        if not len(rows):
            break
        pts, valid, closed = build(rows, r[rows])
        vals = evaluate(rows, pts)
        i, amb = count_index(vals, valid, closed, h0[rows])
        index[rows] = i
        ambiguous[rows] = amb
        rows = rows[amb]
        r[rows] *= 0.5
    return index, ambiguous


def link_index(h, x, dom, r, K=256):
    """Link index of ``h`` at the point ``x``.

    ``dom`` is a :class:`~indexcurv.geometry.PolygonDomain`,
    :class:`SphericalPolygon` or :class:`CapWithHoles` (point located by
    ``x.kind``/``x.feature`` when ``x`` is a ``CriticalPoint``), or a chart /
    ``None`` for a full circle in ``h``'s own parameters.  Raises
    :class:`AmbiguousLink` when a link value ties with ``h(x)`` at every one
    of the five shrunken radii.
    """
    if K < 64:
        raise ValueError("K must be >= 64")
    kind = getattr(x, "kind", "interior")
    feature = getattr(x, "feature", -1)
    if hasattr(x, "location"):
        loc = x.ambient if (x.ambient is not None and dom is not None
                            and getattr(dom, "space", "") == "ambient") else x.location
        s = getattr(x, "edge_s", None)
    else:
        loc, s = x, None
    loc = np.asarray(loc, dtype=float)[None, :]
    idx = np.zeros(1, dtype=np.int64)

    if dom is None or not isinstance(dom, (PolygonDomain, SphericalPolygon, CapWithHoles)):
        def build(rows, rr):
            theta = _angles(K, np.zeros(len(rows)))
            return param_circle(loc[rows], rr, theta), np.ones((len(rows), K), bool), \
                np.ones(len(rows), bool)

        def evaluate(rows, pts):
            return h.value(pts, np.zeros(pts.shape[:2], dtype=np.int64))
        h0 = np.atleast_1d(h.value(loc, idx))
    else:
        geo = LinkGeometry(dom)
        if kind == "edge":
            if s is None:
                s = np.array([_edge_param(dom, feature, loc[0])])
            s = np.atleast_1d(np.asarray(s, dtype=float))

            def build(rows, rr):
                _, pts, valid, closed = geo.edge(np.full(len(rows), feature), s[rows], rr, K)
                return pts, valid, closed
        elif kind == "vertex":
            def build(rows, rr):
                _, pts, valid, closed = geo.vertex(np.full(len(rows), feature), rr, K)
                return pts, valid, closed
        else:
            def build(rows, rr):
                return geo.interior(loc[rows], rr, K)

        def evaluate(rows, pts):
            return geo.evaluate(h, pts, np.zeros(len(rows), dtype=np.int64))
        if geo.space == "param":
            h0 = np.atleast_1d(h.value(loc, idx))
        else:
            h0 = np.atleast_1d(h.ambient_value(loc, idx))
    index, amb = batch_link_index(evaluate, build, h0, np.array([float(r)]))
    if amb[0]:
        raise AmbiguousLink(f"link value within {TIE_TOL:g} of h(x) after {MAX_SHRINK} shrinks")
    return int(index[0])


def _edge_param(dom, e, X):
    if isinstance(dom, PolygonDomain):
        D = dom.edge_vectors[e]
        return float((X - dom.vertices[e]) @ D / (D @ D))
    if isinstance(dom, SphericalPolygon):
        return float(math.atan2(X @ dom.edge_tangents[e], X @ dom.vertices[e]))
    c, rho, o = dom.circles[e]
    e1, e2 = dom._frames[e]
    return float(math.atan2(o * (X @ e2), X @ e1))
