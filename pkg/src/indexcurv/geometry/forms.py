"""Metric and curvature oracles for charts."""

from __future__ import annotations

import numpy as np

from .charts import DegenerateImmersion

DEGENERATE_DET = 1e-14
BRIOSCHI_STEP = 1e-3


def _metric(chart, P):
    J = chart.jacobian(P)
    ru, rv = J[..., 0, :], J[..., 1, :]
    E = (ru * ru).sum(-1)
    F = (ru * rv).sum(-1)
    G = (rv * rv).sum(-1)
    return E, F, G


def first_fundamental_form(chart, p):
    """(E, F, G) at parameter point(s) ``p``.

    Raises :class:`DegenerateImmersion` where ``EG - F^2 <= 1e-14``.
    """
    E, F, G = _metric(chart, p)
    if np.any(E * G - F * F <= DEGENERATE_DET):
        raise DegenerateImmersion(f"{chart.name}: EG - F^2 <= {DEGENERATE_DET:g} at {p}")
    return E, F, G


def area_element(chart, P):
    E, F, G = _metric(chart, P)
    return np.sqrt(np.maximum(E * G - F * F, 0.0))


def gauss_curvature_sff(chart, p):
    """Gauss curvature from the second fundamental form (ambient dimension 3)."""
    if chart.ambient_dim != 3:
        raise ValueError("second-fundamental-form path needs a surface in R^3")
    E, F, G = first_fundamental_form(chart, p)
    J = chart.jacobian(p)
    H = chart.hessian_embed(p)
    n = np.cross(J[..., 0, :], J[..., 1, :])
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    L = (H[..., 0, :] * n).sum(-1)
    M = (H[..., 1, :] * n).sum(-1)
    N = (H[..., 2, :] * n).sum(-1)
    return (L * N - M * M) / (E * G - F * F)


def _metric_derivs(chart, p, h):
    """First and second partials of E, F, G by central differences."""
    p = np.asarray(p, dtype=float)
    eu = np.array([h, 0.0])
    ev = np.array([0.0, h])

    def m(q):
        return np.stack(_metric(chart, q), axis=0)

    c = m(p)
    pu, mu = m(p + eu), m(p - eu)
    pv, mv = m(p + ev), m(p - ev)
    d_u = (pu - mu) / (2 * h)
    d_v = (pv - mv) / (2 * h)
    d_uu = (pu - 2 * c + mu) / (h * h)
    d_vv = (pv - 2 * c + mv) / (h * h)
    d_uv = (m(p + eu + ev) - m(p + eu - ev) - m(p - eu + ev) + m(p - eu - ev)) / (4 * h * h)
    return c, d_u, d_v, d_uu, d_vv, d_uv


def _brioschi_once(chart, p, h):
    c, d_u, d_v, d_uu, d_vv, d_uv = _metric_derivs(chart, p, h)
    E, F, G = c
    Eu, Fu, Gu = d_u
    Ev, Fv, Gv = d_v
    Evv = d_vv[0]
    Guu = d_uu[2]
    Fuv = d_uv[1]
    a11 = -0.5 * Evv + Fuv - 0.5 * Guu
    a12, a13 = 0.5 * Eu, Fu - 0.5 * Ev
    a21, a31 = Fv - 0.5 * Gu, 0.5 * Gv
    det1 = (a11 * (E * G - F * F) - a12 * (a21 * G - F * a31) + a13 * (a21 * F - E * a31))
    b12, b13 = 0.5 * Ev, 0.5 * Gu
    det2 = -b12 * (b12 * G - F * b13) + b13 * (b12 * F - E * b13)
    return (det1 - det2) / (E * G - F * F) ** 2


def gauss_curvature_brioschi(chart, p, h=BRIOSCHI_STEP):
    """Intrinsic Gauss curvature from the metric alone (Brioschi formula).

    Metric derivatives by central differences with one Richardson step, so
    this works for charts in any ambient dimension.
    """
    first_fundamental_form(chart, p)
    return (4.0 * _brioschi_once(chart, p, h / 2.0) - _brioschi_once(chart, p, h)) / 3.0


def gauss_curvature(chart, p):
    """Gauss curvature; second fundamental form in R^3, Brioschi otherwise."""
    if chart.ambient_dim == 3:
        return gauss_curvature_sff(chart, p)
    return gauss_curvature_brioschi(chart, p)


def _nodes(lo, hi, n, periodic):
    if periodic:
        x = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        return x, np.full(n, (hi - lo) / n)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def chart_area(chart, quadrature_n=64, lo=None, hi=None):
    """Area of the chart (or of the sub-rectangle ``[lo, hi]``) by tensor quadrature.

    Periodic axes use the midpoint rule (spectrally accurate), the others
    Gauss-Legendre.
    """
    if quadrature_n < 16:
        raise ValueError("quadrature_n must be >= 16")
    lo = chart.lo if lo is None else np.asarray(lo, dtype=float)
    hi = chart.hi if hi is None else np.asarray(hi, dtype=float)
    full = np.allclose(lo, chart.lo) and np.allclose(hi, chart.hi)
    xu, wu = _nodes(lo[0], hi[0], quadrature_n, chart.periodic[0] and full)
    xv, wv = _nodes(lo[1], hi[1], quadrature_n, chart.periodic[1] and full)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    dA = area_element(chart, np.stack([U, V], axis=-1))
    return float(np.einsum("i,j,ij->", wu, wv, dA))


def check_immersion(chart, n=64):
    """True when ``EG - F^2`` stays above the degeneracy threshold on an n x n grid."""
    P = chart.grid(n)
    E, F, G = _metric(chart, P)
    return bool(np.all(E * G - F * F > DEGENERATE_DET))
