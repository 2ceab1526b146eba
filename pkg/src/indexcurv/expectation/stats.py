"""Independence statistics between the blocks of a product or combined space.

Both tests work on per-sample factor bin totals ``X_k(b)``.  The joint mass
of a bin pair is ``E[X_1(b1) X_2(b2)]``; factorization means it equals
``E[X_1(b1)] E[X_2(b2)]``.  Accumulators hold integer-valued float sums, so
partial results merge exactly in any order.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.stats import chi2

MIN_EXPECTED = 20
Z_GATE = 4.0
P_GATE = 1e-3


class JointAccumulator:
    """Moments of two factors' per-sample bin totals (and region totals)."""

    def __init__(self, nb1, nb2, regions1=None, regions2=None):
        self.nb = (nb1, nb2)
        self.n = 0
        self.s1 = np.zeros(nb1)
        self.s2 = np.zeros(nb2)
        self.c1 = np.zeros(nb1)
        self.c2 = np.zeros(nb2)
        self.q11 = np.zeros((nb1, nb1))
        self.q22 = np.zeros((nb2, nb2))
        self.q12 = np.zeros((nb1, nb2))
        self.R1 = regions1
        self.R2 = regions2
        if regions1 is not None:
            # raw moments E[x^a y^b], a, b in 0..2, per region pair
            self.rm = np.zeros((3, 3, regions1.shape[1], regions2.shape[1]))

    def add(self, X1, X2, C1, C2):
        """``X_k`` sparse (n, nb_k) per-sample totals; ``C_k`` per-bin atom counts."""
        n = X1.shape[0]
        self.n += n
        self.s1 += np.asarray(X1.sum(0)).ravel()
        self.s2 += np.asarray(X2.sum(0)).ravel()
        self.c1 += C1
        self.c2 += C2
        self.q11 += (X1.T @ X1).toarray()
        self.q22 += (X2.T @ X2).toarray()
        self.q12 += (X1.T @ X2).toarray()
        if self.R1 is not None:
            Y1 = (X1 @ self.R1).toarray()
            Y2 = (X2 @ self.R2).toarray()
            P1 = [np.ones_like(Y1), Y1, Y1 * Y1]
            P2 = [np.ones_like(Y2), Y2, Y2 * Y2]
            for a in range(3):
                for b in range(3):
                    self.rm[a, b] += P1[a].T @ P2[b]

    def merge(self, other):
        self.n += other.n
        for name in ("s1", "s2", "c1", "c2", "q11", "q22", "q12"):
            getattr(self, name).__iadd__(getattr(other, name))
        if self.R1 is not None:
            self.rm += other.rm
        return self


def _pinv_rank(C, rtol=1e-9):
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    big = np.abs(w).max() if len(w) else 0.0
    keep = w > rtol * big if big > 0 else np.zeros_like(w, bool)
    inv = (V[:, keep] / w[keep]) @ V[:, keep].T
    return inv, int(keep.sum())


def factorization_test(acc, min_expected=MIN_EXPECTED, mask=None):
    """Per-bin-pair z-scores for E[X1 X2] = E[X1] E[X2] plus a global test.

    The per-bin standard error uses the null model ``var(X1) var(X2) / N``
    (exact under independence).  Bin pairs whose expected joint atom count
    ``c1 c2 / N`` is below ``min_expected`` are excluded and counted.  The
    global statistic is ``N`` times the sum of squared sample canonical
    correlations between the two bin-total vectors (Pillai trace), referred
    to chi-square with ``rank1 * rank2`` degrees of freedom.
    """
    N = acc.n
    if N < 2:
        return {"applicable": True, "underpowered": True, "n_samples": N}
    m1, m2 = acc.s1 / N, acc.s2 / N
    C11 = acc.q11 / N - np.outer(m1, m1)
    C22 = acc.q22 / N - np.outer(m2, m2)
    C12 = acc.q12 / N - np.outer(m1, m2)
    v1, v2 = np.maximum(np.diag(C11), 0.0), np.maximum(np.diag(C22), 0.0)
    se = np.sqrt(np.outer(v1, v2) / N)
    expected = np.outer(acc.c1, acc.c2) / N
    include = expected >= min_expected
    if mask is not None:
        include &= mask
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, C12 / se, 0.0)
    zi = z[include]
    # global test over factor bins with enough atoms
    k1 = acc.c1 >= min_expected if mask is None else (acc.c1 >= min_expected) & mask.any(1)
    k2 = acc.c2 >= min_expected if mask is None else (acc.c2 >= min_expected) & mask.any(0)
    I1, r1 = _pinv_rank(C11[np.ix_(k1, k1)])
    I2, r2 = _pinv_rank(C22[np.ix_(k2, k2)])
    B = C12[np.ix_(k1, k2)]
    T = float(N * np.trace(I1 @ B @ I2 @ B.T)) if r1 and r2 else 0.0
    df = r1 * r2
    p = float(chi2.sf(T, df)) if df else 1.0
    max_z = float(np.abs(zi).max()) if len(zi) else 0.0
    return {
        "applicable": True,
        "n_samples": N,
        "n_bins_tested": int(include.sum()),
        "n_bins_excluded": int((~include).sum()),
        "max_abs_z": max_z,
        "per_bin_pass": bool(max_z < Z_GATE),
        "global_statistic": T,
        "global_df": df,
        "global_p": p,
        "global_pass": bool(p > P_GATE),
        "z": z,
        "included": include,
        "joint_mass": acc.q12 / N,
        "product_mass": np.outer(m1, m2),
        "joint_se": se,
    }


def covariance_test(acc, n_gate=Z_GATE):
    """cov(X_{1,U}, X_{2,V}) for every region pair with an empirical stderr.

    The stderr is floored by the independence-null one ``sqrt(var1 var2 / N)``.

    Passes when ``|cov| < n_gate * se``; pairs where both are zero (a region
    total that never varies) pass and are flagged degenerate.
    """
    N = acc.n
    if acc.R1 is None:
        return {"applicable": False}
    M = acc.rm / max(N, 1)
    ex, ey = M[1, 0], M[0, 1]
    cov = M[1, 1] - ex * ey
    # E[(x - ex)^2 (y - ey)^2] from raw moments
    c4 = (M[2, 2] - 2 * ey * M[2, 1] + ey * ey * M[2, 0]
          - 2 * ex * (M[1, 2] - 2 * ey * M[1, 1] + ey * ey * M[1, 0])
          + ex * ex * (M[0, 2] - 2 * ey * M[0, 1] + ey * ey))
    var1 = M[2, 0][:, 0] - M[1, 0][:, 0] ** 2
    var2 = M[0, 2][0] - M[0, 1][0] ** 2
    # floor by the null variance var1 var2: when joint events are rare the
    # empirical fourth moment collapses and would shrink se to ~|ex ey|
    null = np.maximum(np.outer(var1, var2), 0.0)
    var_pair = np.maximum(c4 - cov * cov, null)
    se = np.sqrt(var_pair / max(N, 1))
    degenerate = (se == 0) & (np.abs(cov) < 1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, cov / se, np.where(degenerate, 0.0, np.inf))
    ok = degenerate | (np.abs(cov) < n_gate * se)
    return {
        "applicable": True,
        "n_samples": N,
        "underpowered": bool(N < 100),
        "cov": cov,
        "stderr": se,
        "z": z,
        "degenerate": degenerate,
        "pass": ok,
        "all_pass": bool(ok.all()),
        "max_abs_z": float(np.abs(z[~degenerate]).max()) if (~degenerate).any() else 0.0,
        "n_degenerate": int(degenerate.sum()),
        "self_variance": [var1.tolist(), var2.tolist()],
    }


def region_matrix(grid, n_regions=3):
    """0/1 (n_bins, n_regions^2) map from bins to an n x n grid of regions."""
    nu, nv = grid.shape
    iu = np.minimum(np.arange(nu) * n_regions // nu, n_regions - 1)
    iv = np.minimum(np.arange(nv) * n_regions // nv, n_regions - 1)
    reg = (iu[:, None] * n_regions + iv[None, :]).ravel()
    return sparse.csr_matrix((np.ones(nu * nv), (np.arange(nu * nv), reg)),
                             shape=(nu * nv, n_regions * n_regions))


def summarize(stat):
    """JSON-friendly view (drops per-bin arrays)."""
    out = {}
    for k, v in stat.items():
        if isinstance(v, np.ndarray):
            continue
        out[k] = v
    return out
