"""Binned index masses, oracle comparison and boundary measures.

Masses are estimated from per-sample bin totals ``X_s(b) = sum of indices of
the atoms of sample s in bin b``: ``mass(b) = mean_s X_s(b)`` and
``stderr(b) = sqrt(var_s X_s(b) / N)``.  All accumulators are sums of small
integers, so merging partial results in any order gives identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._kernels import bin_stats

EDGE_TOL = 1e-9


@dataclass(frozen=True)
class BinGrid:
    """Rectangular bins over two parameter axes.

    Points within ``EDGE_TOL`` outside the range are clipped in (atoms sitting
    on the boundary of a closed region); points further out go to overflow.
    """

    u_edges: np.ndarray
    v_edges: np.ndarray
    periodic: tuple = (False, False)

    @classmethod
    def regular(cls, lo, hi, n_u, n_v, periodic=(False, False)):
        if n_u < 1 or n_v < 1:
            raise ValueError("bin counts must be positive")
        return cls(np.linspace(lo[0], hi[0], int(n_u) + 1),
                   np.linspace(lo[1], hi[1], int(n_v) + 1), tuple(periodic))

    @property
    def shape(self):
        return (len(self.u_edges) - 1, len(self.v_edges) - 1)

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    def same_as(self, other):
        return (self.shape == other.shape and np.array_equal(self.u_edges, other.u_edges)
                and np.array_equal(self.v_edges, other.v_edges))

    def _axis(self, x, edges, periodic):
        lo, hi = edges[0], edges[-1]
        if periodic:
            x = lo + np.mod(x - lo, hi - lo)
        span = hi - lo
        ok = (x >= lo - EDGE_TOL * span) & (x <= hi + EDGE_TOL * span)
        i = np.searchsorted(edges, x, side="right") - 1
        i = np.clip(i, 0, len(edges) - 2)
        return np.where(ok, i, -1)

    def locate(self, loc):
        """Flat bin number per point (``-1`` for overflow)."""
        loc = np.asarray(loc, dtype=float).reshape(-1, 2)
        iu = self._axis(loc[:, 0], self.u_edges, self.periodic[0])
        iv = self._axis(loc[:, 1], self.v_edges, self.periodic[1])
        out = iu * self.shape[1] + iv
        out[(iu < 0) | (iv < 0) | ~np.all(np.isfinite(loc), axis=1)] = -1
        return out

    def bins(self):
        """(lo_u, hi_u, lo_v, hi_v) per flat bin."""
        U0, V0 = np.meshgrid(self.u_edges[:-1], self.v_edges[:-1], indexing="ij")
        U1, V1 = np.meshgrid(self.u_edges[1:], self.v_edges[1:], indexing="ij")
        return np.stack([U0.ravel(), U1.ravel(), V0.ravel(), V1.ravel()], axis=1)

    def to_dict(self):
        return {"u_edges": self.u_edges.tolist(), "v_edges": self.v_edges.tolist(),
                "periodic": list(self.periodic)}


@dataclass
class CurvatureHistogram:
    """Signed index mass per bin plus second moments for standard errors."""

    grid: BinGrid
    n_samples: int = 0
    sums: np.ndarray = None       # sum over samples of X_s(b)
    sumsq: np.ndarray = None      # sum over samples of X_s(b)^2
    counts: np.ndarray = None     # number of atoms in b
    overflow: int = 0
    oracle: np.ndarray | None = None
    areas: np.ndarray | None = None
    name: str = ""
    factor: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nb = self.grid.size
        if self.sums is None:
            self.sums = np.zeros(nb, np.int64)
            self.sumsq = np.zeros(nb, np.int64)
            self.counts = np.zeros(nb, np.int64)

    def merge(self, other):
        if not self.grid.same_as(other.grid):
            raise ValueError("cannot merge histograms over different grids")
        self.n_samples += other.n_samples
        self.sums += other.sums
        self.sumsq += other.sumsq
        self.counts += other.counts
        self.overflow += other.overflow
        return self

    @property
    def mass(self):
        if self.n_samples == 0:
            return np.zeros(self.grid.size)
        return self.sums / self.n_samples

    @property
    def variance(self):
        N = self.n_samples
        if N < 2:
            return np.zeros(self.grid.size)
        m = self.sums / N
        return np.maximum(self.sumsq - N * m * m, 0.0) / (N - 1)

    @property
    def stderr(self):
        if self.n_samples == 0:
            return np.zeros(self.grid.size)
        return np.sqrt(self.variance / self.n_samples)

    @property
    def total(self):
        return float(self.sums.sum()) / max(self.n_samples, 1)

    @property
    def density(self):
        """Mass per unit area (needs ``areas``)."""
        if self.areas is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.areas > 0, self.mass / self.areas, np.nan)


def _atom_arrays(atoms):
    if atoms is None:
        return np.zeros(0, np.int64), np.zeros((0, 2)), np.zeros(0, np.int64)
    if hasattr(atoms, "sample"):
        return atoms.sample, atoms.loc, atoms.index
    atoms = list(atoms)
    if not atoms:
        return np.zeros(0, np.int64), np.zeros((0, 2)), np.zeros(0, np.int64)
    s = np.array([a.sample for a in atoms], dtype=np.int64)
    loc = np.array([np.ravel(a.location)[:2] for a in atoms], dtype=float)
    idx = np.array([a.index for a in atoms], dtype=np.int64)
    return s, loc, idx


def bin_histogram(atoms, grid, n_samples, name="", factor=0, oracle=None):
    """Histogram of index atoms (a ``CriticalSet``-like object or ``IndexAtom`` list).

    ``n_samples`` is N; samples with no atoms count as zeros.
    """
    sample, loc, index = _atom_arrays(atoms)
    b = grid.locate(loc) if len(sample) else np.zeros(0, np.int64)
    sums, sumsq, counts = bin_stats(sample, b, index, grid.size)
    h = CurvatureHistogram(grid, int(n_samples), sums.astype(np.int64), sumsq.astype(np.int64),
                           counts.astype(np.int64), int(np.count_nonzero(b < 0)),
                           oracle=oracle, name=name, factor=factor)
    return h


def per_sample_matrix(sample, bins, index, n_samples, n_bins):
    """Sparse (N, n_bins) matrix of per-sample bin totals."""
    from scipy import sparse
    ok = bins >= 0
    return sparse.csr_matrix((index[ok].astype(float), (sample[ok], bins[ok])),
                             shape=(n_samples, n_bins))


@dataclass
class OracleComparison:
    z: np.ndarray
    max_abs_z: float
    pearson: float | None
    n_bins: int

    def to_dict(self):
        return {"max_abs_z": _f(self.max_abs_z), "pearson": _f(self.pearson),
                "n_bins": self.n_bins}


def _f(x):
    if x is None:
        return None
    x = float(x)
    return None if not math.isfinite(x) else x


def oracle_compare(hist, oracle, mask=None):
    """Per-bin z-scores, max |z| and Pearson correlation against oracle masses.

    The standard error per bin is the empirical one, floored by the smallest
    variance an integer-valued bin total with the oracle's mean can have.

    The Pearson coefficient is ``None`` when the oracle is constant.
    """
    oracle = np.asarray(oracle, dtype=float)
    if oracle.shape not in ((hist.grid.size,), hist.grid.shape):
        raise ValueError(f"oracle shape {oracle.shape} does not match grid {hist.grid.shape}")
    oracle = oracle.ravel()
    mass, N = hist.mass, max(hist.n_samples, 1)
    # X(b) is integer valued, so var X(b) >= |m| - m^2 under the null; this
    # floor keeps bins that happened to collect no atoms from getting se = 0
    floor = np.maximum(np.abs(oracle) - oracle * oracle, 0.0)
    se = np.sqrt(np.maximum(hist.variance, floor) / N)
    sel = np.ones_like(mass, bool) if mask is None else np.asarray(mask, bool).ravel()
    diff = mass - oracle
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / se, np.where(np.abs(diff) < 1e-15, 0.0, np.inf))
    zs = z[sel]
    pearson = None
    o, m = oracle[sel], mass[sel]
    if len(o) >= 2 and np.ptp(o) > 1e-12 * max(1.0, np.abs(o).max()) and np.ptp(m) > 0:
        pearson = float(np.corrcoef(o, m)[0, 1])
    return OracleComparison(z, float(np.abs(zs).max()) if len(zs) else 0.0, pearson, int(sel.sum()))


# --- oracles integrated over bins -------------------------------------------------

def _gl(lo, hi, q):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def integrate_bins(grid, density, q=12):
    """Integral of ``density(P)`` (vectorized over (..., 2)) over every bin."""
    out = np.empty(grid.size)
    for k, (u0, u1, v0, v1) in enumerate(grid.bins()):
        xu, wu = _gl(u0, u1, q)
        xv, wv = _gl(v0, v1, q)
        U, V = np.meshgrid(xu, xv, indexing="ij")
        out[k] = float(np.einsum("i,j,ij->", wu, wv, density(np.stack([U, V], -1))))
    return out


# --- boundary measures --------------------------------------------------------------

@dataclass
class VertexMass:
    vertex: int
    location: list
    mass: float
    stderr: float
    count: int
    oracle: float | None = None
    reference: float | None = None

    def to_dict(self):
        return {"vertex": self.vertex, "location": [float(x) for x in self.location],
                "mass": self.mass, "stderr": self.stderr, "count": self.count,
                "oracle": _f(self.oracle), "reference": _f(self.reference)}


@dataclass
class EdgeProfile:
    edge: int
    s_edges: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray
    counts: np.ndarray
    total_sum: int
    total_sumsq: int
    n_samples: int
    oracle_total: float | None = None

    @property
    def mass(self):
        return self.sums / max(self.n_samples, 1)

    @property
    def stderr(self):
        return _se(self.sums, self.sumsq, self.n_samples)

    @property
    def total(self):
        return self.total_sum / max(self.n_samples, 1)

    @property
    def total_stderr(self):
        return float(_se(np.array([self.total_sum]), np.array([self.total_sumsq]),
                         self.n_samples)[0])

    def to_dict(self):
        return {"edge": self.edge, "s_edges": self.s_edges.tolist(),
                "mass": self.mass.tolist(), "stderr": self.stderr.tolist(),
                "n_atoms": self.counts.tolist(), "total": self.total,
                "total_stderr": self.total_stderr, "oracle_total": _f(self.oracle_total)}


def _se(sums, sumsq, N):
    sums = np.asarray(sums, dtype=float)
    if N < 2:
        return np.zeros_like(sums)
    m = sums / N
    var = np.maximum(np.asarray(sumsq, float) - N * m * m, 0.0) / (N - 1)
    return np.sqrt(var / N)


@dataclass
class BoundaryMeasure:
    vertices: list
    edges: list
    interior_total: float = 0.0
    interior_stderr: float = 0.0
    grand_total_exact: bool = True

    @property
    def vertex_total(self):
        return float(sum(v.mass for v in self.vertices))

    @property
    def edge_total(self):
        return float(sum(e.total for e in self.edges))

    def to_dict(self):
        return {"vertices": [v.to_dict() for v in self.vertices],
                "edges": [e.to_dict() for e in self.edges],
                "vertex_total": self.vertex_total, "edge_total": self.edge_total,
                "interior_total": self.interior_total, "interior_stderr": self.interior_stderr}


class BoundaryAccumulator:
    """Integer accumulators for vertex atoms and per-edge profiles."""

    def __init__(self, n_vertices, edge_ranges, edge_bins=16):
        self.nv = n_vertices
        self.edge_edges = [np.linspace(lo, hi, edge_bins + 1) for lo, hi, _ in edge_ranges]
        ne = len(edge_ranges)
        self.v_sum = np.zeros(n_vertices, np.int64)
        self.v_sq = np.zeros(n_vertices, np.int64)
        self.v_cnt = np.zeros(n_vertices, np.int64)
        self.e_sum = np.zeros((ne, edge_bins), np.int64)
        self.e_sq = np.zeros((ne, edge_bins), np.int64)
        self.e_cnt = np.zeros((ne, edge_bins), np.int64)
        self.t_sum = np.zeros(ne, np.int64)
        self.t_sq = np.zeros(ne, np.int64)
        self.i_sum = 0
        self.i_sq = 0
        self.n = 0

    def add(self, crit, n_samples, rows):
        """Accumulate atoms of the accepted ``rows`` (renumbered 0..n-1 in ``crit``)."""
        from ..critical import EDGE, INTERIOR, VERTEX
        self.n += n_samples
        s, k, f, idx = crit.sample, crit.kind, crit.feature, crit.index
        if self.nv:
            v = k == VERTEX
            sums, sq, cnt = bin_stats(s[v], f[v], idx[v], self.nv)
            self.v_sum += sums
            self.v_sq += sq
            self.v_cnt += cnt
        e = k == EDGE
        ne = len(self.edge_edges)
        for j in range(ne):
            sel = e & (f == j)
            edges = self.edge_edges[j]
            b = np.clip(np.searchsorted(edges, crit.edge_s[sel], side="right") - 1,
                        0, len(edges) - 2)
            sums, sq, cnt = bin_stats(s[sel], b, idx[sel], len(edges) - 1)
            self.e_sum[j] += sums
            self.e_sq[j] += sq
            self.e_cnt[j] += cnt
            ts, tq, _ = bin_stats(s[sel], np.zeros(int(sel.sum()), np.int64), idx[sel], 1)
            self.t_sum[j] += ts[0]
            self.t_sq[j] += tq[0]
        i = k == INTERIOR
        ts, tq, _ = bin_stats(s[i], np.zeros(int(i.sum()), np.int64), idx[i], 1)
        self.i_sum += int(ts[0])
        self.i_sq += int(tq[0])

    def merge(self, other):
        for name in ("v_sum", "v_sq", "v_cnt", "e_sum", "e_sq", "e_cnt", "t_sum", "t_sq"):
            getattr(self, name).__iadd__(getattr(other, name))
        self.i_sum += other.i_sum
        self.i_sq += other.i_sq
        self.n += other.n
        return self


def boundary_decomposition(acc, dom, vertex_oracle=None, vertex_reference=None,
                           edge_oracle=None):
    """Vertex masses and per-edge profiles from a :class:`BoundaryAccumulator`."""
    N = acc.n
    v_se = _se(acc.v_sum, acc.v_sq, N)
    verts = []
    V = getattr(dom, "vertices", np.zeros((0, 2)))
    for i in range(acc.nv):
        verts.append(VertexMass(i, list(V[i]), float(acc.v_sum[i]) / max(N, 1), float(v_se[i]),
                                int(acc.v_cnt[i]),
                                None if vertex_oracle is None else float(vertex_oracle[i]),
                                None if vertex_reference is None else float(vertex_reference[i])))
    edges = []
    for j, edges_s in enumerate(acc.edge_edges):
        edges.append(EdgeProfile(j, edges_s, acc.e_sum[j].copy(), acc.e_sq[j].copy(),
                                 acc.e_cnt[j].copy(), int(acc.t_sum[j]), int(acc.t_sq[j]), N,
                                 None if edge_oracle is None else float(edge_oracle[j])))
    i_se = float(_se(np.array([acc.i_sum]), np.array([acc.i_sq]), N)[0])
    return BoundaryMeasure(verts, edges, acc.i_sum / max(N, 1), i_se)
