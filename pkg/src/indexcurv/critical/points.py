"""Critical point records and solver options."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

INTERIOR, EDGE, VERTEX = 0, 1, 2
KIND_NAMES = ("interior", "edge", "vertex")


class DegenerateCritical(ValueError):
    """A critical point fails the Morse gate (near-singular Hessian)."""


class AmbiguousLink(ValueError):
    """A link sample ties with the centre value even after shrinking the radius."""


class CompletenessUncertified(RuntimeError):
    """The Poincare-Hopf certificate still fails at the largest search grid."""


@dataclass(frozen=True)
class SolverOptions:
    grid_n: int = 16
    max_grid: int = 64
    newton_tol: float = 1e-10
    newton_max_iter: int = 40
    dedupe_radius: float = 1e-6     # fraction of the domain diameter
    link_samples: int = 256
    morse_gate: float = 1e-8
    link_radius: float = 0.05       # fraction of the domain diameter
    scan_n: int = 64                # samples per boundary curve
    cross_check: bool = True        # also score interior points by link index

    def __post_init__(self):
        if self.grid_n < 16:
            raise ValueError("grid_n must be >= 16")
        if self.max_grid < self.grid_n:
            raise ValueError("max_grid must be >= grid_n")
        if self.newton_tol > 1e-10:
            raise ValueError("newton_tol must be <= 1e-10")
        if self.link_samples < 64:
            raise ValueError("link_samples must be >= 64")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise KeyError(f"unknown solver option(s): {', '.join(sorted(bad))}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def refined(self):
        """Options for the next certificate retry: finer grid and scan, smaller links."""
        return replace(self, grid_n=2 * self.grid_n, scan_n=2 * self.scan_n,
                       link_radius=0.5 * self.link_radius)


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    morse_index: int          # -1 for boundary points
    index: int
    kind: str = "interior"
    min_abs_eigenvalue: float = float("nan")
    newton_residual: float = 0.0
    feature: int = -1         # edge or vertex number for boundary points
    link_index: int | None = None
    chart: object = None      # chart the Hessian was evaluated in
    chart_location: np.ndarray | None = None
    ambient: np.ndarray | None = None


@dataclass(frozen=True)
class IndexAtom:
    location: tuple
    index: int
    classification: tuple
    sample: int


def _as2d(a, n):
    a = np.asarray(a, dtype=float)
    if n == 0:
        return a.reshape(0, a.shape[-1] if a.ndim >= 2 else 0)
    return a.reshape(n, -1)


class CriticalSet:
    """Struct-of-arrays critical points for a batch of functions.

    ``sample`` is the row of the function batch.  ``loc`` is the location in
    the domain's canonical coordinates, ``cloc``/``piece`` the chart the
    Hessian was taken in.  ``edge_s`` is the curve parameter for edge points.
    """

    FIELDS = ("sample", "loc", "amb", "value", "morse", "index", "kind", "feature",
              "margin", "residual", "link", "piece", "cloc", "edge_s")

    def __init__(self, **arrays):
        n = len(arrays["sample"])
        self.sample = np.asarray(arrays["sample"], dtype=np.int64)
        self.loc = _as2d(arrays.get("loc", np.zeros((n, 2))), n)
        amb = arrays.get("amb")
        self.amb = np.zeros((n, 0)) if amb is None else _as2d(amb, n)
        self.value = np.asarray(arrays.get("value", np.zeros(n)), dtype=float)
        self.morse = np.asarray(arrays.get("morse", np.full(n, -1)), dtype=np.int64)
        self.index = np.asarray(arrays.get("index", np.zeros(n)), dtype=np.int64)
        self.kind = np.asarray(arrays.get("kind", np.zeros(n)), dtype=np.int64)
        self.feature = np.asarray(arrays.get("feature", np.full(n, -1)), dtype=np.int64)
        self.margin = np.asarray(arrays.get("margin", np.full(n, np.nan)), dtype=float)
        self.residual = np.asarray(arrays.get("residual", np.zeros(n)), dtype=float)
        self.link = np.asarray(arrays.get("link", np.full(n, -99)), dtype=np.int64)
        self.piece = np.asarray(arrays.get("piece", np.zeros(n)), dtype=np.int64)
        self.cloc = _as2d(arrays.get("cloc", self.loc), n)
        self.edge_s = np.asarray(arrays.get("edge_s", np.full(n, np.nan)), dtype=float)

    def __len__(self):
        return len(self.sample)

    @classmethod
    def empty(cls, loc_dim=2, amb_dim=0):
        return cls(sample=np.zeros(0, np.int64), loc=np.zeros((0, loc_dim)),
                   amb=np.zeros((0, amb_dim)), cloc=np.zeros((0, 2)))

    def take(self, sel):
        sel = np.asarray(sel)
        return CriticalSet(**{f: getattr(self, f)[sel] for f in self.FIELDS})

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if p is not None]
        if not parts:
            return cls.empty()
        out = {}
        for f in cls.FIELDS:
            arrs = [getattr(p, f) for p in parts]
            if arrs[0].ndim == 2:
                width = max(a.shape[1] for a in arrs)
                arrs = [a if a.shape[1] == width else
                        np.concatenate([a, np.full((len(a), width - a.shape[1]), np.nan)], 1)
                        for a in arrs]
            out[f] = np.concatenate(arrs)
        return cls(**out)

    def sorted(self):
        order = np.lexsort((self.feature, self.kind, self.sample))
        return self.take(order)

    def index_sums(self, n):
        return np.bincount(self.sample, weights=self.index, minlength=n).astype(np.int64)

    def to_points(self, charts=None):
        """Per-point records (for small, single-function results)."""
        out = []
        for i in range(len(self)):
            piece = int(self.piece[i])
            out.append(CriticalPoint(
                location=self.loc[i].copy(), value=float(self.value[i]),
                morse_index=int(self.morse[i]), index=int(self.index[i]),
                kind=KIND_NAMES[self.kind[i]], min_abs_eigenvalue=float(self.margin[i]),
                newton_residual=float(self.residual[i]), feature=int(self.feature[i]),
                link_index=None if self.link[i] == -99 else int(self.link[i]),
                chart=None if charts is None else charts[piece],
                chart_location=self.cloc[i].copy(),
                ambient=self.amb[i].copy() if self.amb.shape[1] else None))
        return out
