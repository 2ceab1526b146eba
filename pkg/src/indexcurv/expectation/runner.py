"""Monte Carlo over a scenario's function space.

Samples are processed in fixed blocks of ``BLOCK``.  Block ``b`` draws its
functions from ``stream(seed, DIRECTION, b)`` and ``stream(seed, DUMMY, b)``;
a rejected sample ``g`` (global index) is replaced by a draw from
``stream(seed, RETRY, g, attempt, role)``.  Each block is solved and reduced
to integer-valued partial sums independently, and partials are merged in
block order, so the report does not depend on the thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..critical import INTERIOR, OK, STATUS_NAMES, CriticalSet, SolverOptions
from ..morse import RNG_ALGORITHM, ROLE_DIRECTION, ROLE_DUMMY, ROLE_RETRY, stream
from .histogram import (BoundaryAccumulator, CurvatureHistogram, bin_histogram,
                        boundary_decomposition, oracle_compare, per_sample_matrix)
from .stats import JointAccumulator, covariance_test, factorization_test, region_matrix, summarize

BLOCK = 1024
MAX_REJECTION = 0.05
MAX_RETRY_ROUNDS = 20
INTERIOR_MIN_EXPECTED = 5     # Cochran's rule; interior joint counts are small by nature
INDEX_CONVENTION = ("i(x) = 1 - chi({y in S_r(x) & M : h(y) < h(x)}) on the link; "
                    "interior points also (-1)^(number of negative Hessian eigenvalues)")


class ExcessiveRejection(RuntimeError):
    """More than 5% of the drawn samples were rejected."""


@dataclass
class BlockPartial:
    block: int
    n: int
    hists: list
    boundary: BoundaryAccumulator | None
    joint: JointAccumulator | None
    rejected: np.ndarray          # per status code
    disagreements: int
    checked: int
    sums_ok: bool
    factor_atoms: list            # per factor CriticalSet (kept only on request)
    interior: CurvatureHistogram | None = None
    interior_joint: JointAccumulator | None = None


def _solve_block(scenario, seed, block, n, opts, keep_atoms, regions, edge_bins):
    fs_d = scenario.d
    draw = scenario.draw(stream(seed, ROLE_DIRECTION, block), stream(seed, ROLE_DUMMY, block), n)
    out = scenario.solve(scenario.functions(draw), opts)
    rejected = np.zeros(len(STATUS_NAMES), np.int64)
    disagreements, checked = out.disagreements, out.checked
    factors = [[f] for f in out.factors]
    ok_rows = out.status == OK
    for code in range(1, len(STATUS_NAMES)):
        rejected[code] += int(np.count_nonzero(out.status == code))
    bad = np.flatnonzero(~ok_rows)
    # drop atoms of rejected rows
    factors = [[f.take(np.flatnonzero(np.isin(f.sample, bad, invert=True)))] for f in out.factors]
    attempt = 0
    while len(bad):
        if attempt >= MAX_RETRY_ROUNDS:
            raise ExcessiveRejection(f"block {block}: samples still rejected after "
                                     f"{MAX_RETRY_ROUNDS} redraws")
        draws = []
        for j in bad:
            g = block * BLOCK + int(j)
            draws.append(scenario.draw(stream(seed, ROLE_RETRY, g, attempt, ROLE_DIRECTION),
                                       stream(seed, ROLE_RETRY, g, attempt, ROLE_DUMMY), 1))
        fn = scenario.functions(scenario.stack_draws(draws))
        re = scenario.solve(fn, opts)
        disagreements += re.disagreements
        checked += re.checked
        good = re.status == OK
        for code in range(1, len(STATUS_NAMES)):
            rejected[code] += int(np.count_nonzero(re.status == code))
        for k, f in enumerate(re.factors):
            keep = np.flatnonzero(good[f.sample])
            sub = f.take(keep)
            sub.sample = bad[sub.sample]
            factors[k].append(sub)
        bad = bad[~good]
        attempt += 1
    merged = [CriticalSet.concat(parts).sorted() for parts in factors]

    hists, mats = [], []
    for k, cs in enumerate(merged):
        grid = scenario.grids[k]
        h = bin_histogram(cs, grid, n, name=scenario.name, factor=k)
        hists.append(h)
        if fs_d == 2:
            b = grid.locate(cs.loc) if len(cs) else np.zeros(0, np.int64)
            mats.append((per_sample_matrix(cs.sample, b, cs.index, n, grid.size),
                         h.counts.astype(float)))
    boundary = ihist = None
    if scenario.boundary is not None:
        from ..critical.boundary import BoundaryCurves
        curves = BoundaryCurves(scenario.boundary)
        boundary = BoundaryAccumulator(curves.n_vertices, curves.ranges, edge_bins)
        boundary.add(merged[0], n, None)
        inner = merged[0].take(np.flatnonzero(merged[0].kind == INTERIOR))
        ihist = bin_histogram(inner, scenario.grids[0], n, name=scenario.name + ":interior")
    joint = None
    if fs_d == 2:
        R = [region_matrix(scenario.grids[k], regions) for k in range(2)]
        joint = JointAccumulator(scenario.grids[0].size, scenario.grids[1].size, R[0], R[1])
        joint.add(mats[0][0], mats[1][0], mats[0][1], mats[1][1])
    ijoint = None
    if fs_d == 2 and scenario.interior_grids is not None:
        gi = scenario.interior_grids
        ijoint = JointAccumulator(gi[0].size, gi[1].size)
        Xs = []
        for k, cs in enumerate(merged):
            inner = cs.take(np.flatnonzero(cs.kind == INTERIOR))
            b = gi[k].locate(inner.loc) if len(inner) else np.zeros(0, np.int64)
            cnt = np.bincount(b[b >= 0], minlength=gi[k].size).astype(float)
            Xs.append((per_sample_matrix(inner.sample, b, inner.index, n, gi[k].size), cnt))
        ijoint.add(Xs[0][0], Xs[1][0], Xs[0][1], Xs[1][1])
    # per-sample identity over the accepted rows
    totals = _sample_totals(merged, n, fs_d)
    sums_ok = bool(np.all(totals == scenario.chi))
    return BlockPartial(block, n, hists, boundary, joint, rejected, disagreements, checked,
                        sums_ok, merged if keep_atoms else None, ihist, ijoint)


def _sample_totals(merged, n, d):
    if d == 1:
        return merged[0].index_sums(n)
    tot = np.ones(n, np.int64)
    for cs in merged:
        tot *= cs.index_sums(n)
    return tot


@dataclass
class ExperimentReport:
    scenario: str
    seed: int
    samples: int
    rejected: int
    rejected_breakdown: dict
    chi: object
    chi_violations: int
    solver_options: dict
    histograms: list
    boundary: object
    statistics: dict
    wall_time_s: float | None = None
    version: str = __version__
    extras: dict = field(default_factory=dict)
    atoms: list | None = None
    interior_histogram: CurvatureHistogram | None = None

    def to_dict(self):
        d = {
            "scenario": self.scenario,
            "seed": self.seed,
            "samples": self.samples,
            "rejected": self.rejected,
            "rejected_breakdown": self.rejected_breakdown,
            "chi": self.chi,
            "chi_violations": self.chi_violations,
            "solver_options": self.solver_options,
            "histograms": [_hist_dict(h) for h in self.histograms],
            "boundary": (self.boundary.to_dict() if self.boundary is not None
                         else {"vertices": [], "edges": []}),
            "statistics": self.statistics,
            "interior_histogram": (None if self.interior_histogram is None
                                   else _hist_dict(self.interior_histogram)),
            "wall_time_s": self.wall_time_s,
            "version": self.version,
        }
        d.update(self.extras)
        return _clean(d)


def _hist_dict(h):
    grid = h.grid
    b = grid.bins()
    d = {"factor": h.factor, "name": h.name, "shape": list(grid.shape), "grid": grid.to_dict(),
         "samples": h.n_samples, "total_mass": h.total, "overflow": h.overflow,
         "mass": h.mass.tolist(), "stderr": h.stderr.tolist(), "n_atoms": h.counts.tolist(),
         "oracle": None if h.oracle is None else np.asarray(h.oracle).tolist(),
         "bins": b.tolist()}
    dens = h.density
    d["density"] = None if dens is None else dens.tolist()
    return d


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def run_experiment(scenario, N, seed, opts=None, threads=1, regions=3, edge_bins=16,
                   keep_atoms=False, timing=None):
    """Run ``N`` accepted samples of ``scenario`` and reduce them to a report.

    Rejected draws (degenerate or uncertified) are replaced; the run aborts
    with :class:`ExcessiveRejection` when they exceed 5% of ``N``.  ``timing``
    (a dict) receives the wall time; the report itself carries none so that
    identical inputs give identical reports.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    sizes = [min(BLOCK, N - b * BLOCK) for b in range(math.ceil(N / BLOCK))]

    def work(b):
        return _solve_block(scenario, seed, b, sizes[b], opts, keep_atoms, regions, edge_bins)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]

    hists = parts[0].hists
    interior = parts[0].interior
    ijoint = parts[0].interior_joint
    boundary = parts[0].boundary
    joint = parts[0].joint
    rejected = parts[0].rejected.copy()
    disagreements = parts[0].disagreements
    checked = parts[0].checked
    for p in parts[1:]:
        for h, o in zip(hists, p.hists):
            h.merge(o)
        if boundary is not None:
            boundary.merge(p.boundary)
            interior.merge(p.interior)
        if joint is not None:
            joint.merge(p.joint)
        if ijoint is not None:
            ijoint.merge(p.interior_joint)
        rejected += p.rejected
        disagreements += p.disagreements
        checked += p.checked
    for k, h in enumerate(hists):
        h.oracle = scenario.oracles[k]
        h.areas = scenario.areas[k] if scenario.areas else None
    n_rej = int(rejected.sum())
    if n_rej > MAX_REJECTION * N:
        raise ExcessiveRejection(f"{n_rej} of {N + n_rej} draws rejected")

    stats = {"oracle": [], "index_method": {"checked": checked, "disagreements": disagreements}}
    if interior is not None:
        # boundary atoms sit on the domain edge; the density oracle is interior only
        interior.oracle, interior.areas = hists[0].oracle, hists[0].areas
        compared = [interior]
    else:
        compared = hists
    for h in compared:
        if h.oracle is not None:
            cmp = oracle_compare(h, h.oracle)
            stats["oracle"].append({"factor": h.factor, "atoms": "interior" if h is interior
                                    else "all", **cmp.to_dict()})
    if joint is not None:
        stats["factorization"] = summarize(factorization_test(joint))
        if ijoint is not None:
            fi = factorization_test(ijoint, min_expected=INTERIOR_MIN_EXPECTED)
            fi["atoms"] = "interior critical points only"
            fi["grid"] = [list(g.shape) for g in scenario.interior_grids]
            fi["min_expected"] = INTERIOR_MIN_EXPECTED
            stats["factorization_interior"] = summarize(fi)
        cov = covariance_test(joint)
        stats["covariance"] = {k: v for k, v in cov.items() if k not in ("cov", "stderr", "z",
                                                                          "pass", "degenerate")}
        stats["covariance"]["pairs"] = _cov_pairs(cov)
    else:
        stats["factorization"] = {"applicable": False,
                                  "reason": "single factor (d=1): not applicable"}
        stats["covariance"] = {"applicable": False}

    bmeasure = None
    if boundary is not None:
        bmeasure = boundary_decomposition(boundary, scenario.boundary, scenario.vertex_oracle,
                                          scenario.vertex_reference, scenario.edge_oracle)
        stats["boundary_totals"] = {
            "interior": bmeasure.interior_total, "interior_stderr": bmeasure.interior_stderr,
            "interior_oracle": scenario.interior_oracle,
            "vertices": bmeasure.vertex_total, "edges": bmeasure.edge_total,
            "grand_total": bmeasure.interior_total + bmeasure.vertex_total + bmeasure.edge_total}

    all_ok = all(p.sums_ok for p in parts)
    extras = {
        "rng": {"algorithm": RNG_ALGORITHM, "block_size": BLOCK,
                "roles": {"direction": ROLE_DIRECTION, "dummy": ROLE_DUMMY, "retry": ROLE_RETRY}},
        "index_convention": INDEX_CONVENTION,
        "curvature_sign": scenario.e,
        "d": scenario.d,
        "topology_chi": scenario.chi,
        "scenario_params": scenario.describe()["params"],
        "index_method_disagreements": disagreements,
    }
    if scenario.vertex_reference is not None:
        extras["reference_values"] = {
            "vertex_alpha_over_pi": scenario.vertex_reference,
            "note": "alternative vertex weights alpha/pi, reported for reference only"}
    if scenario.notes:
        extras["geometry"] = scenario.notes
    report = ExperimentReport(
        scenario=scenario.name, seed=int(seed), samples=int(N), rejected=n_rej,
        rejected_breakdown={STATUS_NAMES[c]: int(rejected[c]) for c in range(1, len(STATUS_NAMES))},
        chi=int(scenario.chi) if all_ok else None,
        chi_violations=int(rejected[2]),
        solver_options=opts.to_dict(), histograms=hists, boundary=bmeasure, statistics=stats,
        extras=extras, interior_histogram=interior,
        atoms=[p.factor_atoms for p in parts] if keep_atoms else None)
    if timing is not None:
        timing["wall_time_s"] = time.perf_counter() - t0
    return report


def _cov_pairs(cov):
    out = []
    n1, n2 = cov["cov"].shape
    for i in range(n1):
        for j in range(n2):
            out.append({"U": i, "V": j, "cov": float(cov["cov"][i, j]),
                        "stderr": float(cov["stderr"][i, j]), "pass": bool(cov["pass"][i, j]),
                        "degenerate": bool(cov["degenerate"][i, j])})
    return out
