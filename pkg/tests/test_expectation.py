import csv
import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indexcurv.critical import CriticalSet, IndexAtom
from indexcurv.expectation import (CSV_COLUMNS, BinGrid, ExcessiveRejection, JointAccumulator,
                                   bin_histogram, covariance_test, factorization_test,
                                   integrate_bins, oracle_compare, per_sample_matrix,
                                   region_matrix, run_experiment, write_outputs)
from indexcurv.expectation.export import report_json
from indexcurv.scenarios import SolveOutput, build_scenario, sphere_bin_oracle


def test_bin_grid_locate_wraps_and_overflows():
    g = BinGrid.regular((0, -1), (2 * math.pi, 1), 4, 2, periodic=(True, False))
    b = g.locate([[0.1, -0.5], [2 * math.pi + 0.1, 0.5], [1.0, 1.0 + 1e-12], [1.0, 1.5],
                  [np.nan, 0.0]])
    assert b.tolist() == [0, 1, 1, -1, -1]
    assert g.bins().shape == (8, 4)


def test_histogram_moments_by_hand():
    g = BinGrid.regular((0, 0), (1, 1), 2, 1)
    atoms = [IndexAtom((0.2, 0.5), 1, ("interior",), 0), IndexAtom((0.3, 0.5), 1, ("interior",), 0),
             IndexAtom((0.7, 0.5), -1, ("interior",), 1), IndexAtom((0.2, 0.5), 1, ("interior",), 2)]
    h = bin_histogram(atoms, g, 4)
    # per-sample totals in bin 0: 2, 0, 1, 0 ; bin 1: 0, -1, 0, 0
    assert h.mass.tolist() == [0.75, -0.25]
    var0 = np.var([2, 0, 1, 0], ddof=1)
    assert h.stderr[0] == pytest.approx(math.sqrt(var0 / 4))
    assert h.total == pytest.approx(0.5)
    assert h.counts.tolist() == [3, 1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_histogram_merge_matches_single_pass(seed, parts):
    rng = np.random.default_rng(seed)
    n = 60
    s = np.sort(rng.integers(0, n, 150))
    loc = rng.random((150, 2))
    idx = rng.choice([-1, 1], 150)
    g = BinGrid.regular((0, 0), (1, 1), 3, 3)
    whole = bin_histogram(CriticalSet(sample=s, loc=loc, index=idx), g, n)
    cuts = np.sort(rng.integers(0, n, parts - 1))
    bounds = [0, *cuts.tolist(), n]
    hs = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = (s >= a) & (s < b)
        hs.append(bin_histogram(CriticalSet(sample=s[m] - a, loc=loc[m], index=idx[m]), g, b - a))
    merged = hs[0]
    for h in hs[1:]:
        merged.merge(h)
    assert np.array_equal(merged.sums, whole.sums) and np.array_equal(merged.sumsq, whole.sumsq)
    assert merged.n_samples == n


def test_oracle_compare_contract():
    g = BinGrid.regular((0, 0), (1, 1), 2, 2)
    h = bin_histogram([IndexAtom((0.1, 0.1), 1, (), 0)], g, 2)
    with pytest.raises(ValueError):
        oracle_compare(h, np.zeros(3))
    assert oracle_compare(h, np.full(4, 0.25)).pearson is None
    # an empty bin with a positive oracle is scored with the null-variance floor, not se = 0
    cmp = oracle_compare(h, np.array([0.5, 0.5, 0.0, 0.0]))
    assert np.isfinite(cmp.max_abs_z)


def test_integrate_bins_and_sphere_oracle():
    g = BinGrid.regular((0, -0.5 * math.pi), (2 * math.pi, 0.5 * math.pi), 24, 12, (True, False))
    areas = integrate_bins(g, lambda P: np.cos(P[..., 1]))
    assert areas.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    o = sphere_bin_oracle(g)
    assert o.sum() == pytest.approx(2.0, rel=1e-12)
    assert np.allclose(o, areas / (2 * math.pi))


def _joint(X1, X2, nb1, nb2, r1=None, r2=None):
    from scipy import sparse
    acc = JointAccumulator(nb1, nb2, r1, r2)
    A, B = sparse.csr_matrix(X1), sparse.csr_matrix(X2)
    acc.add(A, B, np.abs(X1).sum(0), np.abs(X2).sum(0))
    return acc


def test_factorization_independent_vs_dependent():
    rng = np.random.default_rng(0)
    N = 20_000
    b1 = rng.integers(0, 4, N)
    b2 = rng.integers(0, 4, N)
    X1 = np.eye(4)[b1]
    res = factorization_test(_joint(X1, np.eye(4)[b2], 4, 4))
    assert res["global_p"] > 1e-3 and res["max_abs_z"] < 4
    dep = factorization_test(_joint(X1, np.eye(4)[(b1 + (rng.random(N) < 0.2)) % 4], 4, 4))
    assert dep["global_p"] < 1e-6 and dep["max_abs_z"] > 4


def test_covariance_test_flags_correlation_and_degenerate():
    rng = np.random.default_rng(1)
    N = 20_000
    g = BinGrid.regular((0, 0), (1, 1), 3, 3)
    R = region_matrix(g, 3)
    b1 = rng.integers(0, 8, N)          # region 8 never hit: degenerate pairs
    X1 = np.eye(9)[b1]
    ind = covariance_test(_joint(X1, np.eye(9)[rng.integers(0, 9, N)], 9, 9, R, R))
    assert ind["all_pass"] and ind["n_degenerate"] == 9
    cor = covariance_test(_joint(X1, X1, 9, 9, R, R))
    assert not cor["all_pass"]


def test_covariance_rare_events_use_null_floor():
    # two independent rare region hits that happen never to coincide; the
    # empirical se alone would shrink towards |ex ey|
    N = 20_000
    g = BinGrid.regular((0, 0), (1, 1), 3, 3)
    R = region_matrix(g, 3)
    b1 = np.full(N, 8)
    b2 = np.full(N, 8)
    b1[:60] = 0
    b2[60:120] = 0
    res = covariance_test(_joint(np.eye(9)[b1], np.eye(9)[b2], 9, 9, R, R))
    p = 60 / N
    assert res["cov"][0, 0] == pytest.approx(-p * p)
    assert res["stderr"][0, 0] == pytest.approx(p * (1 - p) / np.sqrt(N))
    assert res["all_pass"]


def test_per_sample_matrix_drops_overflow():
    M = per_sample_matrix(np.array([0, 1, 1]), np.array([0, -1, 1]), np.array([1, 1, -1]), 2, 2)
    assert M.toarray().tolist() == [[1, 0], [0, -1]]


def test_run_is_deterministic_across_threads():
    s = build_scenario({"name": "torus"})
    a = report_json(run_experiment(s, 1500, 7, threads=1))
    b = report_json(run_experiment(s, 1500, 7, threads=3))
    assert a == b
    d = json.loads(a)
    assert d["chi"] == 0 and d["samples"] == 1500 and d["wall_time_s"] is None
    for key in ("scenario", "seed", "samples", "rejected", "chi", "chi_violations",
                "solver_options", "histograms", "boundary", "statistics", "version"):
        assert key in d
    assert set(d["statistics"]) >= {"factorization", "covariance", "oracle"}


def test_rejected_samples_are_redrawn(monkeypatch):
    s = build_scenario({"name": "sphere"})
    real = s.solve
    calls = {"n": 0}

    def flaky(fn, opts):
        out = real(fn, opts)
        calls["n"] += 1
        if calls["n"] == 1:           # first block: mark 3 rows degenerate
            status = out.status.copy()
            status[:3] = 1
            return SolveOutput(status, out.sums, out.factors, out.disagreements, out.checked)
        return out

    monkeypatch.setattr(s, "solve", flaky)
    r = run_experiment(s, 300, 1)
    assert r.rejected == 3 and r.chi == 2 and r.histograms[0].total == 2.0


def test_excessive_rejection_aborts(monkeypatch):
    s = build_scenario({"name": "sphere"})
    real = s.solve

    def bad(fn, opts):
        out = real(fn, opts)
        status = out.status.copy()
        status[: max(1, len(status) // 5)] = 2
        return SolveOutput(status, out.sums, out.factors, out.disagreements, out.checked)

    monkeypatch.setattr(s, "solve", bad)
    with pytest.raises(ExcessiveRejection):
        run_experiment(s, 200, 1)


def test_outputs_written_atomically(tmp_path):
    s = build_scenario({"name": "flat_polygon"})
    r = run_experiment(s, 400, 3)
    paths = write_outputs(r, tmp_path, timing={"wall_time_s": 1.0})
    assert sorted(os.path.basename(p) for p in paths) == ["histograms.csv", "plotdata.txt",
                                                          "report.json", "timing.json"]
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]
    with open(tmp_path / "histograms.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 1 + 16 * 16
    d = json.loads((tmp_path / "report.json").read_text())
    # default triangle is counter-clockwise, so stored order is the input order
    assert [v["oracle"] for v in d["boundary"]["vertices"]] == pytest.approx(
        [0.25, 1 / 3, 5 / 12], abs=1e-12)
    assert [v["reference"] for v in d["boundary"]["vertices"]] == pytest.approx(
        [0.5, 1 / 3, 1 / 6], abs=1e-12)
    assert d["statistics"]["boundary_totals"]["grand_total"] == pytest.approx(1.0, abs=1e-12)
    lines = (tmp_path / "plotdata.txt").read_text().splitlines()
    assert len(lines[1].split()) == 6
