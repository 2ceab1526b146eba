"""Pure-numpy versions of the hot loops.

Every function here has a twin in ``_numba`` with the same signature and
bit-identical output; ``tests/test_kernels.py`` checks both against each other.
"""

import numpy as np


def sublevel_euler(values, valid, closed, h0, tol):
    """Euler characteristic of the sampled sublevel set on link arcs.

    ``values``/``valid`` are (L, K); row ``l`` is one link, sampled in order
    along the arc(s).  Invalid samples (outside the domain) break adjacency.
    ``closed[l]`` joins sample K-1 to sample 0.  Each run of consecutive
    sublevel samples is an arc (chi 1); a closed row that is entirely
    sublevel is a circle (chi 0), which the run-start count gives for free.

    Returns (chi, ambiguous) where ambiguous flags rows with a valid sample
    within ``tol`` of ``h0``.
    """
    values = np.asarray(values, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    diff = values - np.asarray(h0, dtype=np.float64)[:, None]
    ambiguous = np.any(valid & (np.abs(diff) <= tol), axis=1)
    sub = valid & (diff < 0.0)
    prev = np.zeros_like(sub)
    prev[:, 1:] = sub[:, :-1]
    closed = np.asarray(closed, dtype=bool)
    prev[:, 0] = np.where(closed, sub[:, -1], False)
    starts = sub & ~prev
    return starts.sum(axis=1).astype(np.int64), ambiguous


def grid_local_minima(F, periodic0, periodic1):
    """Mask of nodes not exceeding any of their 8 neighbours.

    NaN nodes are never minima and are ignored as neighbours.
    """
    F = np.asarray(F, dtype=np.float64)
    B, n0, n1 = F.shape
    big = np.where(np.isnan(F), np.inf, F)
    mask = ~np.isnan(F)
    for d0 in (-1, 0, 1):
        for d1 in (-1, 0, 1):
            if d0 == 0 and d1 == 0:
                continue
            shifted = np.full_like(big, np.inf)
            src0 = np.arange(n0) + d0
            src1 = np.arange(n1) + d1
            ok0 = (src0 >= 0) & (src0 < n0)
            ok1 = (src1 >= 0) & (src1 < n1)
            if periodic0:
                src0 = src0 % n0
                ok0[:] = True
            if periodic1:
                src1 = src1 % n1
                ok1[:] = True
            i0 = np.nonzero(ok0)[0]
            i1 = np.nonzero(ok1)[0]
            shifted[:, i0[:, None], i1[None, :]] = big[:, src0[i0][:, None], src1[i1][None, :]]
            mask &= big <= shifted
    return mask


def dedupe(points, group, score, radius):
    """Keep-mask merging points of the same group closer than ``radius``.

    Within a cluster the point with the smallest score survives (ties: lowest
    position).  ``group`` must be sorted ascending.
    """
    points = np.asarray(points, dtype=np.float64)
    group = np.asarray(group, dtype=np.int64)
    score = np.asarray(score, dtype=np.float64)
    n = len(group)
    keep = np.ones(n, dtype=bool)
    if n == 0:
        return keep
    bounds = np.flatnonzero(np.diff(group)) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [n]))
    r2 = radius * radius
    for a, b in zip(starts, stops):
        if b - a < 2:
            continue
        pts = points[a:b]
        order = np.lexsort((np.arange(b - a), score[a:b]))
        alive = np.ones(b - a, dtype=bool)
        for i in order:
            if not alive[i]:
                continue
            close = ((pts - pts[i]) ** 2).sum(axis=1) < r2
            close[i] = False
            alive[close] = False
        keep[a:b] = alive
    return keep


def bin_stats(sample, bins, value, n_bins):
    """Per-bin integer sums over atoms.

    Returns (sum of values, sum over samples of the squared per-sample bin
    total, number of atoms).  Atoms with bin < 0 are ignored.
    """
    sample = np.asarray(sample, dtype=np.int64)
    bins = np.asarray(bins, dtype=np.int64)
    value = np.asarray(value, dtype=np.int64)
    ok = bins >= 0
    sample, bins, value = sample[ok], bins[ok], value[ok]
    sums = np.bincount(bins, weights=value, minlength=n_bins).astype(np.int64)
    counts = np.bincount(bins, minlength=n_bins).astype(np.int64)
    if len(bins) == 0:
        return sums, np.zeros(n_bins, dtype=np.int64), counts
    key = sample * n_bins + bins
    uniq, inv = np.unique(key, return_inverse=True)
    per = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(per, inv, value)
    sumsq = np.zeros(n_bins, dtype=np.int64)
    np.add.at(sumsq, uniq % n_bins, per * per)
    return sums, sumsq, counts


def argmin_counts(directions, vertices):
    """How often each vertex minimises ``a . v`` over the directions."""
    directions = np.asarray(directions, dtype=np.float64)
    vertices = np.asarray(vertices, dtype=np.float64)
    counts = np.zeros(len(vertices), dtype=np.int64)
    step = 1 << 16
    for i in range(0, len(directions), step):
        win = np.argmin(directions[i:i + step] @ vertices.T, axis=1)
        counts += np.bincount(win, minlength=len(vertices))
    return counts
