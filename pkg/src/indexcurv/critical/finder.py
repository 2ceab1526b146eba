"""Interior critical points: seeded, damped, batched Newton on grad = 0."""

from __future__ import annotations

import math

import numpy as np

from .._kernels import dedupe, grid_local_minima
from ..geometry import (CapWithHoles, Chart, ClosedSurface, PolygonDomain, SphericalPolygon,
                        sphere_surface)
from ..geometry.domains import ChartPiece
from .points import INTERIOR, CriticalSet, DegenerateCritical

BACKTRACK = 10
SINGULAR_DET = 1e-14
# accepted-point windows of the sphere/ellipsoid atlas (wider than the seed windows)
BAND_ACCEPT = math.radians(70.0)
CAP_ACCEPT = 0.8

_SPHERE = None


def unit_sphere():
    global _SPHERE
    if _SPHERE is None:
        _SPHERE = sphere_surface()
    return _SPHERE


def _sym_eig(H):
    """Eigenvalues (lo, hi) of symmetric 2x2 matrices."""
    a, b, c = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    m = 0.5 * (a + c)
    d = np.hypot(0.5 * (a - c), b)
    return m - d, m + d


def morse_data(H):
    """Morse index, sign index and degeneracy margin |lambda|_min / |lambda|_max."""
    lo, hi = _sym_eig(H)
    morse = (lo < 0).astype(np.int64) + (hi < 0).astype(np.int64)
    big = np.maximum(np.abs(lo), np.abs(hi))
    with np.errstate(invalid="ignore", divide="ignore"):
        margin = np.where(big > 0, np.minimum(np.abs(lo), np.abs(hi)) / big, 0.0)
    return morse, np.where(morse % 2 == 0, 1, -1), margin


def hessian_sign(H, gate=1e-8):
    """(-1)^m for one symmetric matrix of any size; DegenerateCritical below the gate."""
    H = np.asarray(H, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (H + H.T))
    big = np.abs(w).max()
    if big == 0.0 or np.abs(w).min() < gate * big:
        raise DegenerateCritical(f"|lambda_min| / ||H|| = {np.abs(w).min() / max(big, 1e-300):.3g}")
    return 1 if int((w < 0).sum()) % 2 == 0 else -1


def hessian_index(h, x, gate=1e-8):
    """Index of an interior critical point from the Hessian of ``h`` at ``x``.

    ``x`` is a :class:`CriticalPoint` (its ``chart``/``chart_location`` are used
    when present) or a parameter point.
    """
    if getattr(x, "kind", "interior") != "interior":
        raise ValueError("hessian_index needs an interior critical point")
    p = getattr(x, "chart_location", None)
    if p is None:
        p = getattr(x, "location", x)
    chart = getattr(x, "chart", None)
    fn = h.on(chart) if (chart is not None and hasattr(h, "on")) else h
    H = fn.hess(np.asarray(p, dtype=float)[None, :], np.zeros(1, dtype=np.int64))[0]
    return hessian_sign(H, gate)


# --- search contexts ----------------------------------------------------------------

class _Piece:
    """One coordinate patch to run Newton in."""

    def __init__(self, fn, lo, hi, periodic, seeds, seed_ok, embed=None, accept=None,
                 margin=None, jacobian=None):
        self.fn = fn
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.periodic = periodic
        self.seeds = seeds              # (n, n, 2)
        self.seed_ok = seed_ok          # (n, n) bool
        self.embed = embed
        self.accept = accept
        self.margin = margin
        self.jacobian = jacobian
        span = self.hi - self.lo
        self.max_step = 2.0 * float(np.hypot(*span)) / seeds.shape[0]

    def wrap(self, P):
        for k in range(2):
            if self.periodic[k]:
                span = self.hi[k] - self.lo[k]
                P[..., k] = self.lo[k] + np.mod(P[..., k] - self.lo[k], span)
        return P

    def valid(self, P):
        ok = np.all(np.isfinite(P), axis=-1)
        for k in range(2):
            if not self.periodic[k]:
                ok &= (P[..., k] >= self.lo[k]) & (P[..., k] <= self.hi[k])
        if self.margin is not None:
            ok &= self.margin(P) > 1e-3
        return ok


def _chart_piece(fn, piece, n, accept):
    chart = piece.chart
    P, ok = piece.seeds(n)
    return _Piece(fn, chart.lo, chart.hi, chart.periodic, P, ok, embed=chart.embed,
                  accept=accept, margin=chart.margin, jacobian=chart.jacobian)


def _atlas_accept(piece_no, chart, n_pieces):
    if n_pieces == 1:
        return None
    if piece_no == 0:
        return lambda P: np.abs(P[..., 1]) <= BAND_ACCEPT
    return lambda P: np.hypot(P[..., 0], P[..., 1]) <= CAP_ACCEPT


def search_pieces(h, dom, n):
    """Newton contexts for ``h`` on ``dom`` at seed resolution ``n``."""
    if isinstance(dom, Chart):
        dom = ClosedSurface(dom.name, dom, [ChartPiece(dom)], None, None)
    if isinstance(dom, (SphericalPolygon, CapWithHoles)):
        dom = unit_sphere()
    if isinstance(dom, ClosedSurface):
        out = []
        for k, piece in enumerate(dom.pieces):
            fn = h.on(piece.chart) if hasattr(h, "on") else h
            out.append(_chart_piece(fn, piece, n, _atlas_accept(k, piece.chart, len(dom.pieces))))
        return out
    if isinstance(dom, PolygonDomain):
        lo, hi = dom.vertices.min(0), dom.vertices.max(0)
        pad = 0.25 * (hi - lo)
        axes = [lo[k] + (np.arange(n) + 0.5) * (hi[k] - lo[k]) / n for k in range(2)]
        U, V = np.meshgrid(*axes, indexing="ij")
        P = np.stack([U, V], -1)
        return [_Piece(h, lo - pad, hi + pad, (False, False), P, np.ones((n, n), bool))]
    raise TypeError(f"cannot search {type(dom).__name__}")


# --- Newton -------------------------------------------------------------------

def newton(piece, P0, idx, tol, max_iter):
    """Damped Newton on grad = 0 with backtracking on |grad|.

    Returns (converged mask, P, |grad|).
    """
    fn = piece.fn
    P = piece.wrap(np.array(P0, dtype=float))
    g = fn.grad(P, idx)
    gn = np.linalg.norm(g, axis=1)
    alive = piece.valid(P) & (gn >= tol)
    dead = ~piece.valid(P)
    for _ in range(max_iter):
        act = np.flatnonzero(alive)
        if not len(act):
            break
        H = fn.hess(P[act], idx[act])
        ga = g[act]
        a, b, c = H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]
        det = a * c - b * b
        scale = np.maximum(np.abs(H).reshape(len(act), -1).max(1), 1e-300)
        ok = np.abs(det) > SINGULAR_DET * scale * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            step = -np.stack([c * ga[:, 0] - b * ga[:, 1], -b * ga[:, 0] + a * ga[:, 1]], 1) \
                / det[:, None]
        dead[act[~ok]] = True
        alive[act[~ok]] = False
        act, step = act[ok], step[ok]
        norm = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, piece.max_step / np.maximum(norm, 1e-300))[:, None]
        t = np.ones(len(act))
        pend = np.arange(len(act))
        for _ in range(BACKTRACK):
            if not len(pend):
                break
            rows = act[pend]
            Pt = piece.wrap(P[rows] + t[pend, None] * step[pend])
            inside = piece.valid(Pt)
            gt = np.full((len(rows), 2), np.inf)
            if inside.any():
                gt[inside] = fn.grad(Pt[inside], idx[rows[inside]])
            gtn = np.linalg.norm(gt, axis=1)
            better = gtn < gn[rows]
            acc = rows[better]
            P[acc], g[acc], gn[acc] = Pt[better], gt[better], gtn[better]
            t[pend[~better]] *= 0.5
            pend = pend[~better]
        if len(pend):
            dead[act[pend]] = True
            alive[act[pend]] = False
        alive &= gn >= tol
    conv = (gn < tol) & ~dead
    return conv, P, gn


def _seed_points(piece, fn, idx_rows, screen):
    """Seeds per sample: local minima of |grad|^2 on the grid, or all nodes."""
    G = piece.seeds
    n0, n1 = G.shape[:2]
    ok = piece.seed_ok
    nodes = G[ok]                                   # (q, 2)
    B = len(idx_rows)
    if not screen:
        s = np.repeat(np.arange(B), len(nodes))
        return s, np.tile(nodes, (B, 1))
    Gq = np.broadcast_to(G, (B, n0, n1, 2))
    rows = np.broadcast_to(idx_rows[:, None, None], (B, n0, n1))
    F = (fn.grad(Gq, rows) ** 2).sum(-1)
    F = np.where(ok[None], F, np.nan)
    mins = grid_local_minima(F, piece.periodic[0], piece.periodic[1])
    s, i, j = np.nonzero(mins)
    return s, G[i, j]


def interior_search(h, dom, opts, grid_n, rows=None, screen=True):
    """All converged, deduplicated interior critical points for the batch.

    Returns a :class:`CriticalSet` with Hessian data filled in (link indices
    are left to the caller) and the diameter used for the dedupe radius.
    """
    n_fun = h.n
    rows = np.arange(n_fun) if rows is None else np.asarray(rows)
    pieces = search_pieces(h, dom, grid_n)
    parts = []
    for k, piece in enumerate(pieces):
        s, P0 = _seed_points(piece, piece.fn, rows, screen)
        if not len(s):
            continue
        idx = rows[s]
        conv, P, gn = newton(piece, P0, idx, opts.newton_tol, opts.newton_max_iter)
        if piece.accept is not None:
            conv &= piece.accept(P)
        if not conv.any():
            continue
        parts.append((k, idx[conv], P[conv], gn[conv]))
    return _assemble(h, dom, pieces, parts, opts)


def _assemble(h, dom, pieces, parts, opts):
    if not parts:
        return CriticalSet.empty(2, _amb_dim(dom))
    piece = np.concatenate([np.full(len(p[1]), p[0]) for p in parts])
    sample = np.concatenate([p[1] for p in parts])
    P = np.concatenate([p[2] for p in parts])
    resid = np.concatenate([p[3] for p in parts])
    amb = _ambient(dom, pieces, piece, P)
    metric = amb if amb.shape[1] else P
    diam = domain_diameter(dom)
    order = np.lexsort((resid, sample))
    sample, P, resid, piece, amb, metric = (sample[order], P[order], resid[order],
                                            piece[order], amb[order], metric[order])
    keep = dedupe(metric, sample, resid, opts.dedupe_radius * diam)
    sample, P, resid, piece, amb = sample[keep], P[keep], resid[keep], piece[keep], amb[keep]

    if isinstance(dom, (SphericalPolygon, CapWithHoles)):
        inside = dom.contains(amb)
        sample, P, resid, piece, amb = (sample[inside], P[inside], resid[inside],
                                        piece[inside], amb[inside])
    elif isinstance(dom, PolygonDomain):
        inside = dom.contains(P)
        sample, P, resid, piece, amb = (sample[inside], P[inside], resid[inside],
                                        piece[inside], amb[inside])

    H = np.empty((len(sample), 2, 2))
    value = np.empty(len(sample))
    for k, pc in enumerate(pieces):
        sel = piece == k
        if sel.any():
            H[sel] = pc.fn.hess(P[sel], sample[sel])
            value[sel] = pc.fn.value(P[sel], sample[sel])
    morse, index, margin = morse_data(H)
    loc = canonical_location(dom, P, amb)
    out = CriticalSet(sample=sample, loc=loc, amb=amb, value=value, morse=morse, index=index,
                      kind=np.full(len(sample), INTERIOR), margin=margin, residual=resid,
                      piece=piece, cloc=P)
    return out.sorted()


def _amb_dim(dom):
    if isinstance(dom, (ClosedSurface, Chart)):
        return dom.ambient_dim
    if isinstance(dom, (SphericalPolygon, CapWithHoles)):
        return 3
    return 0


def _ambient(dom, pieces, piece, P):
    if pieces[0].embed is None:
        return np.zeros((len(P), 0))
    out = None
    for k, pc in enumerate(pieces):
        sel = piece == k
        if sel.any():
            Y = pc.embed(P[sel])
            if out is None:
                out = np.empty((len(P), Y.shape[-1]))
            out[sel] = Y
    return out


def canonical_location(dom, P, amb):
    if isinstance(dom, ClosedSurface):
        return dom.locate(amb) if dom.locate is not None and len(amb) else P
    if isinstance(dom, (SphericalPolygon, CapWithHoles)):
        return unit_sphere().locate(amb) if len(amb) else np.zeros((0, 2))
    return P


def domain_diameter(dom):
    if isinstance(dom, ClosedSurface):
        return dom.ambient_diameter
    if isinstance(dom, Chart):
        Y = dom.embed(dom.grid(32).reshape(-1, 2))
        return float(np.linalg.norm(Y.max(0) - Y.min(0)))
    return float(dom.diameter)
