"""Numba versions of the hot loops; see ``_numpy`` for the contracts."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sublevel_euler(values, valid, closed, h0, tol):
    L, K = values.shape
    chi = np.zeros(L, dtype=np.int64)
    ambiguous = np.zeros(L, dtype=np.bool_)
    for l in range(L):
        c = 0
        if closed[l]:
            prev = valid[l, K - 1] and values[l, K - 1] - h0[l] < 0.0
        else:
            prev = False
        for k in range(K):
            if not valid[l, k]:
                prev = False
                continue
            d = values[l, k] - h0[l]
            if abs(d) <= tol:
                ambiguous[l] = True
            cur = d < 0.0
            if cur and not prev:
                c += 1
            prev = cur
        chi[l] = c
    return chi, ambiguous


def sublevel_euler(values, valid, closed, h0, tol):
    return _sublevel_euler(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(valid, dtype=np.bool_),
        np.ascontiguousarray(closed, dtype=np.bool_),
        np.ascontiguousarray(h0, dtype=np.float64),
        float(tol),
    )


@njit(cache=True, nogil=True)
def _grid_local_minima(F, periodic0, periodic1):
    B, n0, n1 = F.shape
    mask = np.zeros((B, n0, n1), dtype=np.bool_)
    for b in range(B):
        for i in range(n0):
            for j in range(n1):
                f = F[b, i, j]
                if np.isnan(f):
                    continue
                ok = True
                for d0 in range(-1, 2):
                    ii = i + d0
                    if periodic0:
                        ii %= n0
                    elif ii < 0 or ii >= n0:
                        continue
                    for d1 in range(-1, 2):
                        if d0 == 0 and d1 == 0:
                            continue
                        jj = j + d1
                        if periodic1:
                            jj %= n1
                        elif jj < 0 or jj >= n1:
                            continue
                        g = F[b, ii, jj]
                        if not np.isnan(g) and g < f:
                            ok = False
                            break
                    if not ok:
                        break
                mask[b, i, j] = ok
    return mask


def grid_local_minima(F, periodic0, periodic1):
    return _grid_local_minima(np.ascontiguousarray(F, dtype=np.float64),
                              bool(periodic0), bool(periodic1))


@njit(cache=True, nogil=True)
def _dedupe(points, group, score, radius):
    n, D = points.shape
    keep = np.ones(n, dtype=np.bool_)
    r2 = radius * radius
    a = 0
    while a < n:
        b = a + 1
        while b < n and group[b] == group[a]:
            b += 1
        if b - a > 1:
            # stable order by score
            order = np.argsort(score[a:b], kind="mergesort")
            alive = np.ones(b - a, dtype=np.bool_)
            for oi in range(b - a):
                i = order[oi]
                if not alive[i]:
                    continue
                for j in range(b - a):
                    if j == i or not alive[j]:
                        continue
                    d2 = 0.0
                    for c in range(D):
                        t = points[a + j, c] - points[a + i, c]
                        d2 += t * t
                    if d2 < r2:
                        alive[j] = False
            for j in range(b - a):
                keep[a + j] = alive[j]
        a = b
    return keep


def dedupe(points, group, score, radius):
    return _dedupe(np.ascontiguousarray(points, dtype=np.float64),
                   np.ascontiguousarray(group, dtype=np.int64),
                   np.ascontiguousarray(score, dtype=np.float64),
                   float(radius))


@njit(cache=True, nogil=True)
def _bin_stats(sample, bins, value, n_bins):
    sums = np.zeros(n_bins, dtype=np.int64)
    sumsq = np.zeros(n_bins, dtype=np.int64)
    counts = np.zeros(n_bins, dtype=np.int64)
    n = len(bins)
    sel = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        if bins[i] >= 0:
            sel[m] = sample[i] * n_bins + bins[i]
            vals[m] = value[i]
            sums[bins[i]] += value[i]
            counts[bins[i]] += 1
            m += 1
    if m == 0:
        return sums, sumsq, counts
    sel = sel[:m]
    vals = vals[:m]
    order = np.argsort(sel, kind="mergesort")
    cur = sel[order[0]]
    acc = 0
    for oi in range(m):
        i = order[oi]
        if sel[i] != cur:
            sumsq[cur % n_bins] += acc * acc
            cur = sel[i]
            acc = 0
        acc += vals[i]
    sumsq[cur % n_bins] += acc * acc
    return sums, sumsq, counts


def bin_stats(sample, bins, value, n_bins):
    return _bin_stats(np.ascontiguousarray(sample, dtype=np.int64),
                      np.ascontiguousarray(bins, dtype=np.int64),
                      np.ascontiguousarray(value, dtype=np.int64),
                      int(n_bins))


@njit(cache=True, nogil=True)
def _argmin_counts(directions, vertices):
    n, D = directions.shape
    nv = vertices.shape[0]
    counts = np.zeros(nv, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for v in range(nv):
            s = 0.0
            for c in range(D):
                s += directions[i, c] * vertices[v, c]
            if s < best:
                best = s
                arg = v
        counts[arg] += 1
    return counts


def argmin_counts(directions, vertices):
    return _argmin_counts(np.ascontiguousarray(directions, dtype=np.float64),
                          np.ascontiguousarray(vertices, dtype=np.float64))
