"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on inputs sized like a 1024-sample block; outputs of the two
backends are compared before timing.  numba compile time is excluded (one
warm-up call).
"""

import argparse
import time

import numpy as np

from indexcurv._kernels import _numba, _numpy


def inputs(rng):
    L, K = 4096, 256
    vals = rng.standard_normal((L, K))
    valid = rng.random((L, K)) > 0.05
    closed = rng.random(L) > 0.5
    h0 = rng.standard_normal(L) * 0.1
    F = rng.random((1024, 17, 17))
    P = rng.random((8000, 3))
    group = np.sort(rng.integers(0, 1024, 8000))
    score = rng.random(8000)
    sample = np.sort(rng.integers(0, 1024, 20000))
    bins = rng.integers(0, 288, 20000)
    value = rng.choice([-1, 1], 20000)
    ang = rng.uniform(0, 2 * np.pi, 1_000_000)
    D = np.stack([np.cos(ang), np.sin(ang)], 1)
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.7]])
    return {
        "sublevel_euler": (vals, valid, closed, h0, 1e-12),
        "grid_local_minima": (F, True, False),
        "dedupe": (P, group, score, 1e-3),
        "bin_stats": (sample, bins, value, 288),
        "argmin_counts": (D, V),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def bench(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    data = inputs(np.random.default_rng(0))
    print(f"{'kernel':22s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  same")
    for name in ("sublevel_euler", "grid_local_minima", "dedupe", "bin_stats", "argmin_counts"):
        a = data[name]
        f_np, f_nb = getattr(_numpy, name), getattr(_numba, name)
        same = _same(f_np(*a), f_nb(*a))      # also the numba warm-up
        t_np = bench(f_np, a, args.repeat)
        t_nb = bench(f_nb, a, args.repeat)
        print(f"{name:22s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.1f}  {same}")


if __name__ == "__main__":
    main()
