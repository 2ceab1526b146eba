"""Batch solving with the Poincare-Hopf completeness certificate.

``solve_batch`` runs the interior search and the boundary scan for every row
of a function batch, scores each point, and compares the integer index sum
with the Euler characteristic.  Rows that fail are searched again with a
doubled grid (all nodes as seeds, denser boundary scan, smaller links) until
``max_grid``; rows that still fail are *uncertified*.  Rows with a point
below the Morse gate or an unresolvable link tie are *degenerate*.  Both
kinds are rejected by the caller.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..geometry import (CapWithHoles, Chart, ClosedSurface, PolygonDomain, ProductSpace,
                        SphericalPolygon, SplitPatch)
from .boundary import edge_critical, feature_clearance, vertex_points
from .finder import domain_diameter, interior_search, search_pieces
from .links import LinkGeometry, batch_link_index, param_circle, _angles
from .points import (EDGE, INTERIOR, VERTEX, CompletenessUncertified, CriticalSet,
                     IndexAtom, KIND_NAMES, SolverOptions)

OK, DEGENERATE, UNCERTIFIED = 0, 1, 2
STATUS_NAMES = ("ok", "degenerate", "uncertified")
# interior points closer than this (times the diameter) to the boundary are ties
BOUNDARY_TIE = 1e-9


@dataclass
class BlockResult:
    crit: CriticalSet          # atoms with nonzero index (all interior points kept)
    status: np.ndarray         # per row: OK / DEGENERATE / UNCERTIFIED
    sums: np.ndarray           # per-row index sums
    chi: int
    disagreements: int         # hessian vs link, nondegenerate interior points
    checked: int               # interior points scored both ways
    attempts: np.ndarray       # per row: number of searches run

    @property
    def ok(self):
        return self.status == OK


def has_boundary(dom):
    return isinstance(dom, (PolygonDomain, SphericalPolygon, CapWithHoles))


def _metric(dom, cs):
    """Coordinates in which distances between points of one sample are measured."""
    if isinstance(dom, (ClosedSurface, Chart, SphericalPolygon, CapWithHoles)) and cs.amb.shape[1]:
        return cs.amb
    return cs.cloc


def nearest_other(sample, X):
    """Distance from each point to the nearest other point of the same sample."""
    N = len(sample)
    out = np.full(N, np.inf)
    if N == 0:
        return out
    order = np.argsort(sample, kind="stable")
    s = sample[order]
    _, start, counts = np.unique(s, return_index=True, return_counts=True)
    grp = np.repeat(np.arange(len(start)), counts)
    rank = np.arange(N) - start[grp]
    m = counts.max()
    if m == 1:
        return out
    pad = np.full((len(start), m, X.shape[1]), np.nan)
    pad[grp, rank] = X[order]
    d = np.linalg.norm(pad[:, :, None, :] - pad[:, None, :, :], axis=-1)
    d[:, np.arange(m), np.arange(m)] = np.inf
    d = np.where(np.isnan(d), np.inf, d)
    out[order] = d.min(-1)[grp, rank]
    return out


def _sigma_max(J):
    G = np.einsum("...im,...jm->...ij", J, J)
    a, b, c = G[..., 0, 0], G[..., 0, 1], G[..., 1, 1]
    return np.sqrt(0.5 * (a + c) + np.hypot(0.5 * (a - c), b))


def _interior_links(h, dom, opts, cs, r_metric, K):
    """Link indices of interior points (index and ambiguity flags)."""
    n = len(cs)
    index = np.zeros(n, np.int64)
    amb = np.zeros(n, bool)
    if n == 0:
        return index, amb
    if has_boundary(dom) and isinstance(dom, PolygonDomain):
        geo = LinkGeometry(dom)
        return batch_link_index(
            lambda rows, pts: geo.evaluate(h, pts, cs.sample[rows]),
            lambda rows, rr: geo.interior(cs.cloc[rows], rr, K),
            cs.value, r_metric)
    if isinstance(dom, (SphericalPolygon, CapWithHoles)):
        geo = LinkGeometry(dom)
        return batch_link_index(
            lambda rows, pts: geo.evaluate(h, pts, cs.sample[rows]),
            lambda rows, rr: geo.interior(cs.amb[rows], rr, K),
            cs.value, r_metric)
    pieces = search_pieces(h, dom, 16)
    for k, pc in enumerate(pieces):
        sel = np.flatnonzero(cs.piece == k)
        if not len(sel):
            continue
        P = cs.cloc[sel]
        r = r_metric[sel]
        if pc.jacobian is not None and cs.amb.shape[1]:
            r = r / np.maximum(_sigma_max(pc.jacobian(P)), 1e-300)
        if pc.margin is not None:
            r = np.minimum(r, 0.5 * pc.margin(P))

        def build(rows, rr, P=P):
            theta = _angles(K, np.zeros(len(rows)))
            return param_circle(P[rows], rr, theta), np.ones((len(rows), K), bool), \
                np.ones(len(rows), bool)

        def evaluate(rows, pts, pc=pc, sel=sel):
            idx = np.repeat(cs.sample[sel][rows], K).reshape(-1, K)
            return pc.fn.value(pts, idx)
        i, a = batch_link_index(evaluate, build, cs.value[sel], r)
        index[sel], amb[sel] = i, a
    return index, amb


def _boundary_links(h, dom, cs, r, K):
    geo = LinkGeometry(dom)
    n = len(cs)
    index = np.zeros(n, np.int64)
    amb = np.zeros(n, bool)
    for kind, fn in ((EDGE, geo.edge), (VERTEX, geo.vertex)):
        sel = np.flatnonzero(cs.kind == kind)
        if not len(sel):
            continue
        feat, es = cs.feature[sel], cs.edge_s[sel]

        if kind == EDGE:
            def build(rows, rr, feat=feat, es=es):
                return geo.edge(feat[rows], es[rows], rr, K)[1:]
        else:
            def build(rows, rr, feat=feat):
                return geo.vertex(feat[rows], rr, K)[1:]

        def evaluate(rows, pts, sel=sel):
            return geo.evaluate(h, pts, cs.sample[sel][rows])
        i, a = batch_link_index(evaluate, build, cs.value[sel], r[sel])
        index[sel], amb[sel] = i, a
    return index, amb


def _attempt(h, dom, opts, rows, screen):
    """One search over ``rows``; returns (atoms, degenerate mask over h rows,
    disagreements, checked)."""
    n_all = h.n
    K = opts.link_samples
    degenerate = np.zeros(n_all, bool)
    inner = interior_search(h, dom, opts, opts.grid_n, rows=rows, screen=screen)
    parts = [inner]
    if has_boundary(dom):
        parts += [edge_critical(h, dom, rows, opts.scan_n), vertex_points(h, dom, rows)]
    cs = CriticalSet.concat(parts).sorted()
    if not len(cs):
        return cs, degenerate, 0, 0

    diam = domain_diameter(dom)
    X = _metric(dom, cs)
    r = np.minimum(opts.link_radius * diam, 0.5 * nearest_other(cs.sample, X))
    is_in = cs.kind == INTERIOR
    if has_boundary(dom):
        clear = np.empty(len(cs))
        clear[is_in] = dom.boundary_distance(X[is_in]) if is_in.any() else 0.0
        if (~is_in).any():
            clear[~is_in] = feature_clearance(dom, X[~is_in], cs.kind[~is_in],
                                              cs.feature[~is_in])
        r = np.minimum(r, 0.5 * clear)
        near = is_in & (clear < BOUNDARY_TIE * diam)
        degenerate[cs.sample[near]] = True
    # coincident points (r == 0) cannot be scored
    degenerate[cs.sample[r <= 0.0]] = True
    r = np.maximum(r, 1e-300)

    link = np.full(len(cs), -99, np.int64)
    ambig = np.zeros(len(cs), bool)
    gate_ok = np.ones(len(cs), bool)
    if is_in.any():
        sel = np.flatnonzero(is_in)
        gate_ok[sel] = cs.margin[sel] >= opts.morse_gate
        degenerate[cs.sample[sel[~gate_ok[sel]]]] = True
        if opts.cross_check:
            li, la = _interior_links(h, dom, opts, cs.take(sel), r[sel], K)
            link[sel], ambig[sel] = li, la
    if (~is_in).any():
        sel = np.flatnonzero(~is_in)
        li, la = _boundary_links(h, dom, cs.take(sel), r[sel], K)
        link[sel], ambig[sel] = li, la
        cs.index[sel] = li
    cs.link = link
    degenerate[cs.sample[ambig]] = True
    degenerate[cs.sample[np.abs(cs.index) >= 2]] = True

    checked = is_in & gate_ok & ~ambig & (link != -99)
    disagree = int(np.count_nonzero(checked & (link != cs.index)))
    keep = is_in | (cs.index != 0)
    return cs.take(np.flatnonzero(keep)), degenerate, disagree, int(checked.sum())


def topology_of(dom):
    topo = getattr(dom, "topology", None)
    if topo is None:
        raise ValueError(f"{type(dom).__name__} carries no topology")
    return topo


def solve_batch(h, dom, opts=None, chi=None):
    """Find, score and certify critical points for every row of ``h``."""
    opts = opts or SolverOptions()
    chi = topology_of(dom).euler_char if chi is None else int(chi)
    n = h.n
    rows = np.arange(n)
    cs, degen, disagree, checked = _attempt(h, dom, opts, rows, screen=True)
    attempts = np.ones(n, np.int64)
    sums = cs.index_sums(n)
    failing = np.flatnonzero((sums != chi) & ~degen)
    o = opts
    while len(failing):
        o = o.refined()
        if o.grid_n > opts.max_grid:
            break
        cs2, degen2, d2, c2 = _attempt(h, dom, o, failing, screen=False)
        attempts[failing] += 1
        drop = np.isin(cs.sample, failing)
        cs = CriticalSet.concat([cs.take(np.flatnonzero(~drop)), cs2]).sorted()
        degen[failing] = degen2[failing]
        disagree, checked = disagree + d2, checked + c2
        sums = cs.index_sums(n)
        failing = failing[(sums[failing] != chi) & ~degen[failing]]
    status = np.full(n, OK, np.int8)
    status[(sums != chi)] = UNCERTIFIED
    status[degen] = DEGENERATE
    return BlockResult(cs, status, sums, chi, disagree, checked, attempts)


# --- public single-function API -------------------------------------------------

def find_critical_points(h, dom, opts=None):
    """Interior critical points of one function (a batch of one)."""
    opts = opts or SolverOptions()
    cs = interior_search(h, dom, opts, opts.grid_n)
    pieces = search_pieces(h, dom, opts.grid_n)
    return cs.to_points([p.fn.chart if hasattr(p.fn, "chart") else None for p in pieces])


def boundary_scan(h, poly, opts=None):
    """Boundary atoms (edges and vertices with nonzero link index) of one function."""
    opts = opts or SolverOptions()
    rows = np.zeros(1, np.int64)
    cs = CriticalSet.concat([edge_critical(h, poly, rows, opts.scan_n),
                             vertex_points(h, poly, rows)]).sorted()
    if not len(cs):
        return []
    X = _metric(poly, cs)
    r = np.minimum(opts.link_radius * poly.diameter, 0.5 * nearest_other(cs.sample, X))
    r = np.minimum(r, 0.5 * feature_clearance(poly, X, cs.kind, cs.feature))
    idx, amb = _boundary_links(h, poly, cs, r, opts.link_samples)
    if amb.any():
        from .points import AmbiguousLink
        raise AmbiguousLink("boundary link tie after shrinking")
    cs.index = idx
    cs.link = idx
    return cs.take(np.flatnonzero(idx != 0)).to_points()


def solve(h, dom, opts=None):
    """Certified critical points of one function; raises when uncertified."""
    res = solve_batch(h, dom, opts)
    if res.status[0] == UNCERTIFIED:
        raise CompletenessUncertified(f"index sum {res.sums[0]} != chi {res.chi}")
    return res


# --- products -------------------------------------------------------------------

def pair_rows(sample_a, sample_b, n):
    """Index pairs (i, j) with sample_a[i] == sample_b[j], grouped by sample."""
    ca = np.bincount(sample_a, minlength=n)
    cb = np.bincount(sample_b, minlength=n)
    sa = np.cumsum(ca) - ca
    sb = np.cumsum(cb) - cb
    oa = np.argsort(sample_a, kind="stable")
    ob = np.argsort(sample_b, kind="stable")
    tot = ca * cb
    s = np.repeat(np.arange(n), tot)
    k = np.arange(tot.sum()) - np.repeat(np.cumsum(tot) - tot, tot)
    i = k // np.maximum(cb[s], 1)
    j = k % np.maximum(cb[s], 1)
    return oa[sa[s] + i], ob[sb[s] + j], s


def block_product_atoms(blocks):
    """Cartesian product of per-block critical point lists (one sample).

    Each atom's index is the product of block indices and its classification
    the tuple of block kinds.
    """
    if len(blocks) == 1:
        return [IndexAtom(tuple(np.atleast_1d(p.location)), p.index, (p.kind,), 0)
                for p in blocks[0] if p.index != 0]
    atoms = []
    for combo in itertools.product(*blocks):
        idx = int(np.prod([p.index for p in combo]))
        if idx == 0:
            continue
        loc = tuple(tuple(np.atleast_1d(p.location)) for p in combo)
        atoms.append(IndexAtom(loc, idx, tuple(p.kind for p in combo), 0))
    return atoms


@dataclass
class Certificate:
    certified: bool
    total: int
    chi: int

    def __bool__(self):
        return self.certified


def poincare_hopf_sum(atoms, topo):
    """Exact integer comparison of the atom index sum with chi."""
    chi = topo.euler_char if hasattr(topo, "euler_char") else int(topo)
    total = int(sum(a.index for a in atoms))
    return Certificate(total == chi, total, chi)


@dataclass
class ProductResult:
    blocks: list               # BlockResult per block
    pairs: list                # per-block atom row arrays of each product atom (d arrays)
    sample: np.ndarray         # product atom sample
    index: np.ndarray          # product atom index
    status: np.ndarray
    sums: np.ndarray
    chi: int


def solve_product(f, space, opts=None):
    """Solve every block of a combined function and form the product atoms."""
    opts = opts or SolverOptions()
    n = f.n
    blocks = [solve_batch(f.blocks[k], space.block_domain(k), opts) for k in range(f.d)]
    status = np.max(np.stack([b.status for b in blocks]), axis=0)
    atoms = [np.flatnonzero(blocks[0].crit.index != 0)]
    sample = blocks[0].crit.sample[atoms[0]]
    index = blocks[0].crit.index[atoms[0]]
    for b in blocks[1:]:
        nz = np.flatnonzero(b.crit.index != 0)
        i, j, s = pair_rows(sample, b.crit.sample[nz], n)
        atoms = [a[i] for a in atoms] + [nz[j]]
        index = index[i] * b.crit.index[nz[j]]
        sample = s
    sums = np.bincount(sample, weights=index, minlength=n).astype(np.int64)
    chi = topology_of(space).euler_char
    bad = (status == OK) & (sums != chi)
    status = status.copy()
    status[bad] = UNCERTIFIED
    return ProductResult(blocks, atoms, sample, index, status, sums, chi)


def kind_name(k):
    return KIND_NAMES[int(k)]
