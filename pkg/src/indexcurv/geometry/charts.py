"""Parametrized surface patches and the shipped chart catalog.

A chart maps parameter points ``(u, v)`` to ambient Euclidean space.  All
evaluators are vectorized over leading axes: ``P`` has shape ``(..., 2)``,
``embed`` returns ``(..., m)``, ``jacobian`` ``(..., 2, m)`` (rows r_u, r_v)
and ``hessian_embed`` ``(..., 3, m)`` (rows r_uu, r_uv, r_vv).
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
FD_STEP = 1e-5
FD_HESS_STEP = 1e-4


class DegenerateImmersion(ValueError):
    """The chart jacobian has (numerically) dependent columns."""


def _richardson(f, P, h, axis):
    """Central difference of ``f`` along parameter ``axis``, one Richardson step."""
    e = np.zeros(2)
    e[axis] = 1.0

    def central(step):
        return (f(P + step * e) - f(P - step * e)) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


class Chart:
    """A parametrized embedded 2-patch.

    ``jacobian`` and ``hessian`` may be omitted for user-defined charts; they
    are then obtained by central differences (step 1e-5 for the jacobian,
    1e-4 on the jacobian for the hessian, one Richardson extrapolation each).
    ``margin`` returns the parameter distance to the chart's singular set
    (default: infinitely far).
    """

    def __init__(self, name, embed, lo, hi, periodic=(False, False), jacobian=None,
                 hessian=None, margin=None, ambient_dim=None):
        self.name = name
        self._embed = embed
        self._jac = jacobian
        self._hess = hessian
        self._margin = margin
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.periodic = (bool(periodic[0]), bool(periodic[1]))
        if ambient_dim is None:
            ambient_dim = int(np.asarray(embed(0.5 * (self.lo + self.hi))).shape[-1])
        self.ambient_dim = ambient_dim

    def __repr__(self):
        return f"Chart({self.name!r}, m={self.ambient_dim})"

    @property
    def diameter(self):
        return float(np.hypot(*(self.hi - self.lo)))

    @property
    def has_analytic_derivatives(self):
        return self._jac is not None and self._hess is not None

    def embed(self, P):
        return self._embed(np.asarray(P, dtype=float))

    def jacobian(self, P):
        P = np.asarray(P, dtype=float)
        if self._jac is not None:
            return self._jac(P)
        du = _richardson(self._embed, P, FD_STEP, 0)
        dv = _richardson(self._embed, P, FD_STEP, 1)
        return np.stack([du, dv], axis=-2)

    def hessian_embed(self, P):
        P = np.asarray(P, dtype=float)
        if self._hess is not None:
            return self._hess(P)
        J = lambda Q: self.jacobian(Q)  # noqa: E731
        dJu = _richardson(J, P, FD_HESS_STEP, 0)
        dJv = _richardson(J, P, FD_HESS_STEP, 1)
        ruu = dJu[..., 0, :]
        ruv = 0.5 * (dJu[..., 1, :] + dJv[..., 0, :])
        rvv = dJv[..., 1, :]
        return np.stack([ruu, ruv, rvv], axis=-2)

    def margin(self, P):
        P = np.asarray(P, dtype=float)
        if self._margin is None:
            return np.full(P.shape[:-1], np.inf)
        return self._margin(P)

    def wrap(self, P):
        """Reduce periodic coordinates into ``[lo, hi)``."""
        P = np.array(P, dtype=float, copy=True)
        for k in range(2):
            if self.periodic[k]:
                span = self.hi[k] - self.lo[k]
                P[..., k] = self.lo[k] + np.mod(P[..., k] - self.lo[k], span)
        return P

    def contains(self, P, pad=0.0):
        P = np.asarray(P, dtype=float)
        ok = np.ones(P.shape[:-1], dtype=bool)
        for k in range(2):
            if not self.periodic[k]:
                ok &= (P[..., k] >= self.lo[k] + pad) & (P[..., k] <= self.hi[k] - pad)
        return ok

    def grid(self, n):
        """Cell-centred ``n x n`` parameter grid, shape ``(n, n, 2)``."""
        axes = [self.lo[k] + (np.arange(n) + 0.5) * (self.hi[k] - self.lo[k]) / n
                for k in range(2)]
        U, V = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.stack([U, V], axis=-1)


# --- ellipsoid / sphere ---------------------------------------------------

def ellipsoid_chart(a=1.0, b=1.0, c=1.0, name=None):
    """Latitude-longitude chart: u longitude in [0, 2pi), v latitude."""
    a, b, c = float(a), float(b), float(c)

    def embed(P):
        u, v = P[..., 0], P[..., 1]
        cv = np.cos(v)
        return np.stack([a * cv * np.cos(u), b * cv * np.sin(u), c * np.sin(v)], axis=-1)

    def jac(P):
        u, v = P[..., 0], P[..., 1]
        cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
        z = np.zeros_like(u)
        ru = np.stack([-a * cv * su, b * cv * cu, z], axis=-1)
        rv = np.stack([-a * sv * cu, -b * sv * su, c * cv], axis=-1)
        return np.stack([ru, rv], axis=-2)

    def hess(P):
        u, v = P[..., 0], P[..., 1]
        cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
        z = np.zeros_like(u)
        ruu = np.stack([-a * cv * cu, -b * cv * su, z], axis=-1)
        ruv = np.stack([a * sv * su, -b * sv * cu, z], axis=-1)
        rvv = np.stack([-a * cv * cu, -b * cv * su, -c * sv], axis=-1)
        return np.stack([ruu, ruv, rvv], axis=-2)

    def margin(P):
        return 0.5 * math.pi - np.abs(P[..., 1])

    if name is None:
        name = "sphere" if a == b == c == 1.0 else "ellipsoid"
    chart = Chart(name, embed, (0.0, -0.5 * math.pi), (TWO_PI, 0.5 * math.pi),
                  periodic=(True, False), jacobian=jac, hessian=hess, margin=margin,
                  ambient_dim=3)
    chart.axes = (a, b, c)
    return chart


def ellipsoid_cap_chart(a=1.0, b=1.0, c=1.0, sign=1.0, radius=0.7):
    """Graph chart over the ``(x/a, y/b)`` disk near the pole ``sign * c e_z``."""
    a, b, c, s = float(a), float(b), float(c), float(sign)

    def embed(P):
        x, y = P[..., 0], P[..., 1]
        w = np.sqrt(np.maximum(1.0 - x * x - y * y, 0.0))
        return np.stack([a * x, b * y, s * c * w], axis=-1)

    def jac(P):
        x, y = P[..., 0], P[..., 1]
        w = np.sqrt(np.maximum(1.0 - x * x - y * y, 1e-300))
        z = np.zeros_like(x)
        rx = np.stack([a + z, z, -s * c * x / w], axis=-1)
        ry = np.stack([z, b + z, -s * c * y / w], axis=-1)
        return np.stack([rx, ry], axis=-2)

    def hess(P):
        x, y = P[..., 0], P[..., 1]
        w2 = np.maximum(1.0 - x * x - y * y, 1e-300)
        w3 = w2 * np.sqrt(w2)
        z = np.zeros_like(x)
        rxx = np.stack([z, z, -s * c * (1.0 - y * y) / w3], axis=-1)
        rxy = np.stack([z, z, -s * c * x * y / w3], axis=-1)
        ryy = np.stack([z, z, -s * c * (1.0 - x * x) / w3], axis=-1)
        return np.stack([rxx, rxy, ryy], axis=-2)

    def margin(P):
        return 1.0 - np.hypot(P[..., 0], P[..., 1])

    tag = "north" if s > 0 else "south"
    return Chart(f"ellipsoid_cap_{tag}", embed, (-radius, -radius), (radius, radius),
                 jacobian=jac, hessian=hess, margin=margin, ambient_dim=3)


# --- torus ----------------------------------------------------------------

def torus_chart(R=2.0, r=1.0):
    """Torus with parameters (s, t) = (minor angle, major angle)."""
    R, r = float(R), float(r)
    if not (0.0 < r < R):
        raise ValueError(f"torus needs 0 < r < R, got R={R}, r={r}")

    def embed(P):
        s, t = P[..., 0], P[..., 1]
        rho = R + r * np.cos(s)
        return np.stack([rho * np.cos(t), rho * np.sin(t), r * np.sin(s)], axis=-1)

    def jac(P):
        s, t = P[..., 0], P[..., 1]
        cs, ss, ct, st = np.cos(s), np.sin(s), np.cos(t), np.sin(t)
        rho = R + r * cs
        z = np.zeros_like(s)
        rs = np.stack([-r * ss * ct, -r * ss * st, r * cs], axis=-1)
        rt = np.stack([-rho * st, rho * ct, z], axis=-1)
        return np.stack([rs, rt], axis=-2)

    def hess(P):
        s, t = P[..., 0], P[..., 1]
        cs, ss, ct, st = np.cos(s), np.sin(s), np.cos(t), np.sin(t)
        rho = R + r * cs
        z = np.zeros_like(s)
        rss = np.stack([-r * cs * ct, -r * cs * st, -r * ss], axis=-1)
        rst = np.stack([r * ss * st, -r * ss * ct, z], axis=-1)
        rtt = np.stack([-rho * ct, -rho * st, z], axis=-1)
        return np.stack([rss, rst, rtt], axis=-2)

    chart = Chart("torus", embed, (0.0, 0.0), (TWO_PI, TWO_PI), periodic=(True, True),
                  jacobian=jac, hessian=hess, ambient_dim=3)
    chart.radii = (R, r)
    return chart


def torus_locate(Y, R=2.0, r=1.0):
    Y = np.asarray(Y, dtype=float)
    rho = np.hypot(Y[..., 0], Y[..., 1])
    t = np.mod(np.arctan2(Y[..., 1], Y[..., 0]), TWO_PI)
    s = np.mod(np.arctan2(Y[..., 2], rho - R), TWO_PI)
    return np.stack([s, t], axis=-1)


def ellipsoid_locate(Y, a=1.0, b=1.0, c=1.0):
    Y = np.asarray(Y, dtype=float)
    x, y, z = Y[..., 0] / a, Y[..., 1] / b, Y[..., 2] / c
    u = np.mod(np.arctan2(y, x), TWO_PI)
    v = np.arctan2(z, np.hypot(x, y))
    return np.stack([u, v], axis=-1)


# --- plane -----------------------------------------------------------------

def plane_chart(lo=(0.0, 0.0), hi=(1.0, 1.0)):
    """Identity embedding of a parameter rectangle into R^2."""

    def embed(P):
        return np.array(P, dtype=float, copy=True)

    def jac(P):
        J = np.zeros(P.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        return J

    def hess(P):
        return np.zeros(P.shape[:-1] + (3, 2))

    return Chart("plane", embed, lo, hi, jacobian=jac, hessian=hess, ambient_dim=2)


# --- 4-sphere patch ----------------------------------------------------------

class SpherePatch4:
    """Graph patch of the round unit 4-sphere over the box ``[-delta, delta]^4``.

    X(z) = (z_1, z_2, z_3, z_4, sqrt(1 - |z|^2)) in R^5.  Coordinate pairs
    (z_1, z_2) and (z_3, z_4) are the two 2-plane blocks.  ``flat=True`` gives
    the identity embedding into R^5 (last coordinate 0), used as the
    zero-curvature control.
    """

    dim = 4
    ambient_dim = 5

    def __init__(self, delta=0.2, flat=False):
        delta = float(delta)
        if not (0.0 < delta < 0.5):
            raise ValueError(f"delta must lie in (0, 0.5), got {delta}")
        self.delta = delta
        self.flat = bool(flat)
        self.lo = np.full(4, -delta)
        self.hi = np.full(4, delta)

    def embed(self, Z):
        Z = np.asarray(Z, dtype=float)
        if self.flat:
            w = np.zeros(Z.shape[:-1])
        else:
            w = np.sqrt(1.0 - (Z * Z).sum(axis=-1))
        return np.concatenate([Z, w[..., None]], axis=-1)

    def jacobian(self, Z):
        """Shape ``(..., 4, 5)``: row i is dX/dz_i."""
        Z = np.asarray(Z, dtype=float)
        J = np.zeros(Z.shape[:-1] + (4, 5))
        for i in range(4):
            J[..., i, i] = 1.0
        if not self.flat:
            w = np.sqrt(1.0 - (Z * Z).sum(axis=-1))
            J[..., :, 4] = -Z / w[..., None]
        return J

    def hessian(self, Z):
        """Shape ``(..., 4, 4, 5)``; only the last ambient component is nonzero."""
        Z = np.asarray(Z, dtype=float)
        H = np.zeros(Z.shape[:-1] + (4, 4, 5))
        if not self.flat:
            w2 = 1.0 - (Z * Z).sum(axis=-1)
            w = np.sqrt(w2)
            outer = Z[..., :, None] * Z[..., None, :]
            H[..., 4] = -(np.eye(4) * w2[..., None, None] + outer) / (w2 * w)[..., None, None]
        return H

    def volume_element(self, Z):
        Z = np.asarray(Z, dtype=float)
        if self.flat:
            return np.ones(Z.shape[:-1])
        return 1.0 / np.sqrt(1.0 - (Z * Z).sum(axis=-1))

    def slice_chart(self, slot, w):
        """Coordinate 2-surface: block ``slot`` free, the others frozen at ``w``."""
        w = np.asarray(w, dtype=float)
        cols = slice(2 * slot, 2 * slot + 2)

        def full(P):
            Q = np.broadcast_to(w, P.shape[:-1] + (4,)).copy()
            Q[..., cols] = P
            return Q

        def embed(P):
            return self.embed(full(P))

        def jac(P):
            return self.jacobian(full(P))[..., cols, :]

        def hess(P):
            H = self.hessian(full(P))
            i, j = 2 * slot, 2 * slot + 1
            return np.stack([H[..., i, i, :], H[..., i, j, :], H[..., j, j, :]], axis=-2)

        d = self.delta
        return Chart(f"s4patch_slice{slot}", embed, (-d, -d), (d, d), jacobian=jac,
                     hessian=hess, ambient_dim=5)


CHART_NAMES = ("sphere", "torus", "ellipsoid", "plane", "s4patch")


def get_chart(name, **params):
    """Catalog lookup by name.  ``s4patch`` returns a :class:`SpherePatch4`."""
    if name == "sphere":
        return ellipsoid_chart(1.0, 1.0, 1.0)
    if name == "torus":
        return torus_chart(params.get("R", 2.0), params.get("r", 1.0))
    if name == "ellipsoid":
        return ellipsoid_chart(params.get("a", 1.0), params.get("b", 1.5), params.get("c", 2.0))
    if name == "plane":
        return plane_chart()
    if name == "s4patch":
        return SpherePatch4(params.get("delta", 0.2))
    raise KeyError(f"unknown chart {name!r}; known: {', '.join(CHART_NAMES)}")
