"""Probability spaces of Morse functions.

Height functions ``f_a(x) = a . x`` restricted to a chart, and combined
functions that add one frozen-coordinate block per 2-plane factor.  All
function objects are *batches*: row ``i`` of the coefficient array is sample
``i``.  A single function (the ``ChartFunction`` of the docs) is a batch of
one, and the point evaluators then take ``idx=None``.

Randomness comes from counter-based streams: :func:`stream` derives an
independent Philox generator from ``(seed, *key)`` through
``SeedSequence.spawn_key``, so any sample can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ClosedSurface, ProductSpace, SplitPatch
from .geometry.forms import area_element

RNG_ALGORITHM = "numpy.random.Philox seeded by SeedSequence(seed, spawn_key=key)"

# role tags that enter stream keys
ROLE_DIRECTION = 1
ROLE_DUMMY = 2
ROLE_RETRY = 3
ROLE_ORACLE = 4

DUMMY_MAX_ROUNDS = 10_000


def stream(seed, *key):
    """Independent generator for ``(seed, key...)``; keys are non-negative ints."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Direction:
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "a", a)

    def __neg__(self):
        return Direction(-self.a)

    @property
    def m(self):
        return len(self.a)


def sample_directions(rng, m, n):
    """``n`` uniform points on the unit sphere of R^m, shape ``(n, m)``."""
    if m < 2:
        raise ValueError("ambient dimension must be >= 2")
    A = rng.standard_normal((n, m))
    norm = np.linalg.norm(A, axis=1)
    bad = norm == 0.0
    while np.any(bad):
        A[bad] = rng.standard_normal((int(bad.sum()), m))
        norm = np.linalg.norm(A, axis=1)
        bad = norm == 0.0
    return A / norm[:, None]


def sample_direction(rng, m):
    return Direction(sample_directions(rng, m, 1)[0])


# --- function batches ----------------------------------------------------------

def _rows(arr, idx):
    if idx is None:
        if len(arr) != 1:
            raise ValueError("idx is required for batches with more than one function")
        return arr[0]
    return arr[np.asarray(idx)]


class HeightFunctions:
    """``p -> a_i . X(p) + offset_i`` on a chart, one row per sample.

    Gradient and Hessian are the chain rule through the chart with no metric
    correction; at critical points that is all the index needs.
    """

    kind = "height"

    def __init__(self, chart, A, offset=None, provenance=None):
        self.chart = chart
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.A.shape[1] != chart.ambient_dim:
            raise ValueError(f"coefficients have dimension {self.A.shape[1]}, chart "
                             f"{chart.name} lives in R^{chart.ambient_dim}")
        self.offset = np.zeros(len(self.A)) if offset is None else np.asarray(offset, float)
        self.provenance = provenance or {}

    @property
    def n(self):
        return len(self.A)

    def on(self, chart):
        return HeightFunctions(chart, self.A, self.offset, self.provenance)

    def subset(self, rows):
        rows = np.asarray(rows)
        return HeightFunctions(self.chart, self.A[rows], self.offset[rows], self.provenance)

    def value(self, P, idx=None):
        X = self.chart.embed(P)
        return (X * _rows(self.A, idx)).sum(-1) + _rows(self.offset, idx)

    def grad(self, P, idx=None):
        J = self.chart.jacobian(P)
        return np.einsum("...km,...m->...k", J, _rows(self.A, idx))

    def hess(self, P, idx=None):
        H = self.chart.hessian_embed(P)
        h = np.einsum("...km,...m->...k", H, _rows(self.A, idx))
        return _sym2(h)

    def ambient_value(self, Y, idx=None):
        return (np.asarray(Y) * _rows(self.A, idx)).sum(-1) + _rows(self.offset, idx)

    # single-function conveniences
    def eval(self, p):
        return self.value(p)


def _sym2(h):
    out = np.empty(h.shape[:-1] + (2, 2))
    out[..., 0, 0] = h[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = h[..., 1]
    out[..., 1, 1] = h[..., 2]
    return out


class SliceHeightFunctions:
    """Block ``slot`` of a height function on the 4-box patch.

    Row ``i`` is ``z_slot -> a_i . X(w_i with block slot replaced by z_slot)``.
    """

    kind = "slice"

    def __init__(self, patch, slot, W, A, provenance=None):
        self.patch = patch
        self.slot = int(slot)
        self.W = np.atleast_2d(np.asarray(W, dtype=float))
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.A.shape[1] != patch.ambient_dim or self.W.shape[1] != patch.dim:
            raise ValueError("slice function shapes do not match the patch")
        self.provenance = provenance or {}
        self._cols = slice(2 * self.slot, 2 * self.slot + 2)

    @property
    def n(self):
        return len(self.A)

    def subset(self, rows):
        rows = np.asarray(rows)
        return SliceHeightFunctions(self.patch, self.slot, self.W[rows], self.A[rows],
                                    self.provenance)

    def chart_for(self, i):
        return self.patch.slice_chart(self.slot, self.W[i])

    def _full(self, P, idx):
        P = np.asarray(P, dtype=float)
        W = _rows(self.W, idx)
        Q = np.broadcast_to(W, np.broadcast_shapes(W.shape[:-1], P.shape[:-1]) + (4,)).copy()
        Q[..., self._cols] = P
        return Q

    def value(self, P, idx=None):
        return (self.patch.embed(self._full(P, idx)) * _rows(self.A, idx)).sum(-1)

    def grad(self, P, idx=None):
        J = self.patch.jacobian(self._full(P, idx))[..., self._cols, :]
        return np.einsum("...km,...m->...k", J, _rows(self.A, idx))

    def hess(self, P, idx=None):
        H = self.patch.hessian(self._full(P, idx))[..., self._cols, self._cols, :]
        return np.einsum("...ijm,...m->...ij", H, _rows(self.A, idx))

    def eval(self, p):
        return self.value(p)


class CallableFunction:
    """A single user-supplied function of the parameter point.

    Missing derivatives come from central differences of ``f``.
    """

    kind = "callable"
    n = 1

    def __init__(self, f, grad=None, hess=None, step=1e-5):
        self._f = f
        self._g = grad
        self._h = hess
        self._step = step

    def value(self, P, idx=None):
        return self._f(np.asarray(P, dtype=float))

    def grad(self, P, idx=None):
        P = np.asarray(P, dtype=float)
        if self._g is not None:
            return self._g(P)
        h = self._step
        e = np.eye(2) * h
        return np.stack([(self._f(P + e[k]) - self._f(P - e[k])) / (2 * h) for k in range(2)],
                        axis=-1)

    def hess(self, P, idx=None):
        P = np.asarray(P, dtype=float)
        if self._h is not None:
            return self._h(P)
        h = 1e-4
        e = np.eye(2) * h
        cols = [(self.grad(P + e[k]) - self.grad(P - e[k])) / (2 * h) for k in range(2)]
        H = np.stack(cols, axis=-1)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def subset(self, rows):
        return self

    def eval(self, p):
        return self.value(p)


def restrict_height(a, chart):
    """Height function of direction ``a`` on a chart (or a closed surface's canonical chart)."""
    if isinstance(chart, ClosedSurface):
        chart = chart.chart
    a = a.a if isinstance(a, Direction) else np.asarray(a, dtype=float)
    if a.shape[-1] != chart.ambient_dim:
        raise ValueError("direction and chart ambient dimensions differ")
    return HeightFunctions(chart, a.reshape(1, -1), provenance={"chart": chart.name})


# --- dummy points --------------------------------------------------------------

class AreaSampler:
    """Rejection sampler for the normalized area (volume) measure of a space."""

    def __init__(self, space):
        self.space = space
        if isinstance(space, ClosedSurface):
            self.lo, self.hi = space.chart.lo, space.chart.hi
            self.density = lambda P: area_element(space.chart, P)
            probe = space.chart.grid(128).reshape(-1, 2)
            self.bound = 1.05 * float(self.density(probe).max())
        elif isinstance(space, SplitPatch):
            self.lo, self.hi = space.patch.lo, space.patch.hi
            self.density = space.patch.volume_element
            self.bound = float(self.density(self.hi))
        else:
            raise TypeError(f"no area sampler for {type(space).__name__}")
        self.dim = len(self.lo)

    def sample(self, rng, n):
        out = np.empty((n, self.dim))
        have = 0
        rounds = 0
        while have < n:
            rounds += 1
            if rounds > DUMMY_MAX_ROUNDS:
                raise RuntimeError("rejection sampling failed; check the domain weight")
            want = max(2 * (n - have), 16)
            P = self.lo + (self.hi - self.lo) * rng.random((want, self.dim))
            keep = rng.random(want) * self.bound < self.density(P)
            P = P[keep][: n - have]
            out[have:have + len(P)] = P
            have += len(P)
        return out


def dummy_sampler(space):
    """Sampler for points of the full space (concatenated factor parameters)."""
    if isinstance(space, ProductSpace):
        parts = [AreaSampler(f) for f in space.factors]

        class _Product:
            dim = space.dim

            def sample(self, rng, n):
                return np.concatenate([p.sample(rng, n) for p in parts], axis=1)

        return _Product()
    return AreaSampler(space)


def sample_dummy_points(rng, space, d, n=None):
    """``d`` independent area-weighted points of the space.

    Returns a list of ``d`` arrays of shape ``(dim,)`` or, with ``n``, of
    shape ``(n, dim)``.
    """
    if d != getattr(space, "d", 1):
        raise ValueError("d must equal the number of factors")
    sampler = dummy_sampler(space)
    size = 1 if n is None else n
    pts = [sampler.sample(rng, size) for _ in range(d)]
    return [p[0] for p in pts] if n is None else pts


# --- combined functions ----------------------------------------------------------

class CombinedFunction:
    """``z -> sum_k f_k(w_k with block k replaced by z_k)``.

    ``blocks[k]`` is the function of ``z_k`` alone (with the frozen part of
    ``f_k`` carried as an offset), so ``value`` is the block sum by
    construction; :meth:`direct_value` recomputes the defining formula with
    no block decomposition.
    """

    def __init__(self, space, A, W, blocks, frame="chart"):
        self.space = space
        self.A = [np.atleast_2d(a) for a in A]
        self.W = [np.atleast_2d(w) for w in W]
        self.blocks = blocks
        self.frame = frame

    @property
    def d(self):
        return len(self.blocks)

    @property
    def n(self):
        return self.blocks[0].n

    def value(self, Z, idx=None):
        Z = np.asarray(Z, dtype=float)
        return sum(b.value(Z[..., 2 * k:2 * k + 2], idx) for k, b in enumerate(self.blocks))

    def direct_value(self, Z, idx=None):
        Z = np.asarray(Z, dtype=float)
        total = 0.0
        for k in range(self.d):
            W = _rows(self.W[k], idx)
            Q = np.broadcast_to(W, np.broadcast_shapes(W.shape[:-1], Z.shape[:-1])
                                + (self.space.dim,)).copy()
            Q[..., 2 * k:2 * k + 2] = Z[..., 2 * k:2 * k + 2]
            total = total + (self.space.embed(Q) * _rows(self.A[k], idx)).sum(-1)
        return total

    def full_hessian(self, Z, idx=None, h=1e-4):
        """Hessian of :meth:`direct_value` in all 2d coordinates, by central differences."""
        Z = np.asarray(Z, dtype=float)
        D = Z.shape[-1]
        e = np.eye(D) * h
        H = np.empty(Z.shape[:-1] + (D, D))
        f0 = self.direct_value(Z, idx)
        for i in range(D):
            fp = self.direct_value(Z + e[i], idx)
            fm = self.direct_value(Z - e[i], idx)
            H[..., i, i] = (fp - 2 * f0 + fm) / (h * h)
            for j in range(i + 1, D):
                v = (self.direct_value(Z + e[i] + e[j], idx) - self.direct_value(Z + e[i] - e[j], idx)
                     - self.direct_value(Z - e[i] + e[j], idx)
                     + self.direct_value(Z - e[i] - e[j], idx)) / (4 * h * h)
                H[..., i, j] = H[..., j, i] = v
        return H


class DegenerateBlock(ValueError):
    """A block of a combined function failed the Morse gate."""


def make_combined(f, w, space):
    """Combined function from ``d`` directions and ``d`` dummy points.

    ``f[k]`` is a :class:`Direction` or an ``(n, m)`` array of coefficient
    rows in the ambient space of ``space``; ``w[k]`` is an ``(n, dim)`` array
    (or one point).  For a one-factor product with no dummies this is
    :func:`restrict_height`.
    """
    d = getattr(space, "d", 1)
    if len(f) != d or (w is not None and len(w) != d):
        raise ValueError("need one direction and one dummy point per factor")
    A = [np.atleast_2d(fk.a if isinstance(fk, Direction) else np.asarray(fk, float)) for fk in f]
    n = len(A[0])
    if w is None:
        w = [np.zeros((n, space.dim)) for _ in range(d)]
    W = [np.broadcast_to(np.atleast_2d(np.asarray(wk, float)), (n, space.dim)) for wk in w]
    blocks = []
    if isinstance(space, ProductSpace):
        sl = space.ambient_slices
        for k, fac in enumerate(space.factors):
            offset = np.zeros(n)
            for j, other in enumerate(space.factors):
                if j == k:
                    continue
                Xo = other.chart.embed(W[k][:, 2 * j:2 * j + 2])
                offset += (Xo * A[k][:, sl[j]]).sum(-1)
            blocks.append(HeightFunctions(fac.chart, A[k][:, sl[k]], offset,
                                          provenance={"block": k, "factor": fac.name}))
    elif isinstance(space, SplitPatch):
        for k in range(d):
            blocks.append(SliceHeightFunctions(space.patch, k, W[k], A[k],
                                               provenance={"block": k}))
    else:
        raise TypeError(f"cannot combine over {type(space).__name__}")
    return CombinedFunction(space, A, W, blocks)


@dataclass(frozen=True)
class FunctionSpace:
    """How a scenario draws its Morse functions.

    ``kind`` is ``height`` (one direction on one surface/region) or
    ``combined`` (one direction and one dummy point per factor).
    """

    kind: str
    ambient_dim: int
    d: int = 1
    antipodal: bool = False
    rng: str = RNG_ALGORITHM
