import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indexcurv._kernels import _numpy

nb = pytest.importorskip("indexcurv._kernels._numba")


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(3, 40))
def test_sublevel_euler_backends_agree(seed, L, K):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((L, K))
    valid = rng.random((L, K)) > 0.2
    closed = rng.random(L) > 0.5
    h0 = rng.standard_normal(L) * 0.3
    assert _same(_numpy.sublevel_euler(vals, valid, closed, h0, 1e-12),
                 nb.sublevel_euler(vals, valid, closed, h0, 1e-12))


def test_sublevel_euler_arcs_and_circles():
    # one arc, two arcs, a full sublevel circle (chi 0), an open full arc (chi 1)
    vals = np.array([[1, -1, -1, 1, 1, 1],
                     [-1, 1, -1, 1, 1, 1],
                     [-1, -1, -1, -1, -1, -1],
                     [-1, -1, -1, -1, -1, -1]], float)
    valid = np.ones_like(vals, bool)
    closed = np.array([True, True, True, False])
    chi, amb = _numpy.sublevel_euler(vals, valid, closed, np.zeros(4), 1e-12)
    assert chi.tolist() == [1, 2, 0, 1]
    assert not amb.any()
    # wrap-around join: runs at both ends of a closed row form one arc
    chi, _ = _numpy.sublevel_euler(np.array([[-1.0, 1, 1, -1]]), np.ones((1, 4), bool),
                                   np.array([True]), np.zeros(1), 1e-12)
    assert chi[0] == 1


def test_sublevel_euler_flags_ties():
    _, amb = _numpy.sublevel_euler(np.array([[1.0, 0.0, 1.0]]), np.ones((1, 3), bool),
                                   np.array([False]), np.zeros(1), 1e-12)
    assert amb[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_grid_local_minima_backends_agree(seed, p0, p1):
    rng = np.random.default_rng(seed)
    F = rng.random((3, 9, 7))
    F[rng.random(F.shape) < 0.1] = np.nan
    assert _same(_numpy.grid_local_minima(F, p0, p1), nb.grid_local_minima(F, p0, p1))


def test_grid_local_minima_finds_bowl():
    x = np.linspace(-1, 1, 11)
    F = (x[:, None] - 0.2) ** 2 + (x[None, :] + 0.4) ** 2
    m = _numpy.grid_local_minima(F[None], False, False)[0]
    assert np.argwhere(m).tolist() == [[6, 3]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.3))
def test_dedupe_backends_agree(seed, radius):
    rng = np.random.default_rng(seed)
    n = 60
    P = rng.random((n, 2))
    g = np.sort(rng.integers(0, 5, n))
    s = rng.random(n)
    assert _same(_numpy.dedupe(P, g, s, radius), nb.dedupe(P, g, s, radius))


def test_dedupe_keeps_best_score():
    P = np.array([[0.0, 0.0], [1e-9, 0.0], [1.0, 0.0], [0.0, 0.0]])
    keep = _numpy.dedupe(P, np.array([0, 0, 0, 1]), np.array([0.5, 0.1, 0.0, 0.0]), 1e-6)
    assert keep.tolist() == [False, True, True, True]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bin_stats_backends_agree(seed):
    rng = np.random.default_rng(seed)
    s = np.sort(rng.integers(0, 20, 200))
    b = rng.integers(0, 7, 200)
    v = rng.choice([-1, 1], 200)
    assert _same(_numpy.bin_stats(s, b, v, 7), nb.bin_stats(s, b, v, 7))


def test_bin_stats_squares_per_sample_totals():
    # sample 0 puts +1 and +1 in bin 0 (total 2), sample 1 puts -1 (total -1)
    sums, sq, cnt = _numpy.bin_stats(np.array([0, 0, 1]), np.array([0, 0, 0]),
                                     np.array([1, 1, -1]), 2)
    assert sums.tolist() == [1, 0] and sq.tolist() == [5, 0] and cnt.tolist() == [3, 0]


def test_argmin_counts_backends_agree():
    rng = np.random.default_rng(3)
    ang = rng.uniform(0, 2 * np.pi, 5000)
    D = np.stack([np.cos(ang), np.sin(ang)], 1)
    V = rng.random((4, 2))
    a, b = _numpy.argmin_counts(D, V), nb.argmin_counts(D, V)
    assert _same(a, b) and a.sum() == 5000


def _backend_under(value):
    env = dict(os.environ, INDEXCURV_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from indexcurv._kernels import BACKEND; print(BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_flag_selects_backend():
    assert _backend_under("numpy").stdout.strip() == "numpy"
    assert _backend_under("numba").stdout.strip() == "numba"
    assert _backend_under("fortran").returncode != 0
