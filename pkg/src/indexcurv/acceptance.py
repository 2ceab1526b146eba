"""The eight acceptance criteria, shared by ``indexcurv verify`` and the tests.

Each ``criterion_k(scale=1.0)`` returns a :class:`Criterion` with the
measured quantities.  ``scale`` multiplies every sample count (the CLI's
reduced-N mode uses a smaller scale); time budgets stay at their full values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import argmin_counts
from .critical import DegenerateCritical, INTERIOR, OK, SolverOptions, hessian_sign, pair_rows
from .critical.solve import solve_product
from .expectation import run_experiment
from .expectation.export import report_json
from .geometry.domains import normal_cone_mass, alpha_over_pi_weight, spherical_triangle_area
from .morse import ROLE_ORACLE, stream
from .scenarios import build_scenario, sectional_sign_margin

SEED = 20240611
Z_GATE = 4.0


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    seconds: float
    budget_s: float
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        why = "" if self.passed else "  [" + "; ".join(self.failures) + "]"
        return (f"criterion {self.number} {tag}  {self.title}  "
                f"({self.seconds:.1f} s of {self.budget_s:.0f} s){why}")


class _Check:
    def __init__(self, number, title, budget_s):
        self.number, self.title, self.budget = number, title, budget_s
        self.details, self.failures = {}, []
        self.t0 = time.perf_counter()

    def require(self, ok, what):
        if not ok:
            self.failures.append(what)
        return ok

    def done(self, extra_seconds=0.0):
        dt = time.perf_counter() - self.t0 + extra_seconds
        self.require(dt < self.budget, f"runtime {dt:.1f} s over budget {self.budget:.0f} s")
        return Criterion(self.number, self.title, not self.failures, dt, self.budget,
                         self.details, self.failures)


def _n(N, scale):
    return max(200, int(round(N * scale)))


def pe_suite():
    """(label, scenario config) pairs of the Poincare-Hopf suite."""
    return [
        ("sphere", {"name": "sphere"}),
        ("torus", {"name": "torus"}),
        ("ellipsoid", {"name": "ellipsoid"}),
        ("flat_polygon", {"name": "flat_polygon"}),
        ("spherical_triangle", {"name": "spherical_triangle"}),
        ("cap_with_holes_p0", {"name": "cap_with_holes", "params": {"p": 0}}),
        ("cap_with_holes_p1", {"name": "cap_with_holes", "params": {"p": 1}}),
        ("cap_with_holes_p2", {"name": "cap_with_holes", "params": {"p": 2}}),
        ("product_sphere_sphere", {"name": "product", "params": {"factors": ["sphere", "sphere"]}}),
        ("s4patch", {"name": "s4patch"}),
    ]


def ph_reports(N=2000, seed=SEED, threads=1):
    return {label: run_experiment(build_scenario(cfg), N, seed, threads=threads)
            for label, cfg in pe_suite()}


_PH_CACHE = {}


def _cached_ph(N, seed):
    key = (N, seed)
    if key not in _PH_CACHE:
        t0 = time.perf_counter()
        reps = ph_reports(N, seed)
        _PH_CACHE[key] = (reps, time.perf_counter() - t0)
    return _PH_CACHE[key]


def criterion_1(scale=1.0, seed=SEED):
    N = _n(2000, scale)
    c = _Check(1, "Poincare-Hopf exactness", 60.0)
    reps, _ = _cached_ph(N, seed)
    for label, r in reps.items():
        s = build_scenario(dict(pe_suite())[label])
        rate = r.rejected / (r.samples + r.rejected)
        c.details[label] = {"chi": r.chi, "expected_chi": s.chi, "rejection_rate": rate,
                            "chi_violations": r.chi_violations}
        c.require(r.chi == s.chi, f"{label}: per-sample sums differ from chi={s.chi}")
        c.require(rate < 0.01, f"{label}: rejection rate {rate:.3%} >= 1%")
    return c.done()


def criterion_2(scale=1.0, seed=SEED):
    N = _n(100_000, scale)
    c = _Check(2, "Gauss-Bonnet density oracle", 180.0)
    t = run_experiment(build_scenario({"name": "torus", "params": {"R": 2.0, "r": 1.0},
                                       "bins": {"u": 16, "v": 16}}), N, seed)
    pearson = t.statistics["oracle"][0]["pearson"]
    sp = run_experiment(build_scenario({"name": "sphere"}), N, seed)
    zmax = sp.statistics["oracle"][0]["max_abs_z"]
    c.details.update(samples=N, torus_pearson=pearson, sphere_max_abs_z=zmax)
    c.require(pearson is not None and pearson >= 0.99, f"torus Pearson {pearson} < 0.99")
    c.require(zmax < Z_GATE, f"sphere max |z| {zmax:.2f} >= 4")
    return c.done()


def criterion_3(scale=1.0, seed=SEED):
    N = _n(2000, scale)
    c = _Check(3, "index-method agreement", 60.0)
    reps, t_ph = _cached_ph(N, seed)
    total = checked = 0
    for label, r in reps.items():
        im = r.statistics["index_method"]
        c.details[label] = im
        total += im["disagreements"]
        checked += im["checked"]
    c.details.update(checked=checked, disagreements=total)
    c.require(checked > 0, "no interior points were cross-checked")
    c.require(total == 0, f"{total} Hessian/link index disagreements")
    return c.done()


def criterion_4(scale=1.0, seed=SEED):
    N = _n(100_000, scale)
    c = _Check(4, "flat-triangle boundary measure", 60.0)
    s = build_scenario({"name": "flat_polygon"})
    r = run_experiment(s, N, seed)
    verts = r.boundary.vertices
    poly = s.boundary
    # brute-force oracle: which vertex minimises a.x for 10^6 directions
    M = _n(1_000_000, scale)
    ang = stream(seed, ROLE_ORACLE, 4).uniform(0.0, 2 * math.pi, M)
    counts = argmin_counts(np.stack([np.cos(ang), np.sin(ang)], 1), poly.vertices)
    brute = counts / M
    masses, ses = [], []
    for i, v in enumerate(verts):
        masses.append(v.mass)
        ses.append(v.stderr)
        z = (v.mass - v.oracle) / v.stderr if v.stderr > 0 else math.inf
        c.require(abs(z) < 3.0, f"vertex {i}: mass {v.mass:.4f} vs {v.oracle:.4f} ({z:.2f} sigma)")
        bse = math.sqrt(v.oracle * (1 - v.oracle) / M)
        c.require(abs(brute[i] - v.oracle) < 4 * bse + 1e-12,
                  f"vertex {i}: brute-force {brute[i]:.5f} vs normal cone {v.oracle:.5f}")
    ref = [v.reference for v in verts]
    c.require(all(x is not None for x in ref), "alpha/pi references missing from the report")
    c.details.update(samples=N, masses=masses, stderr=ses, oracle=[v.oracle for v in verts],
                     brute_force=brute.tolist(), alpha_over_pi=ref,
                     user_order_oracle=[normal_cone_mass(poly, i) for i in range(3)],
                     user_order_alpha_over_pi=[alpha_over_pi_weight(poly, i) for i in range(3)])
    return c.done()


def criterion_5(scale=1.0, seed=SEED):
    N = _n(100_000, scale)
    c = _Check(5, "spherical octant triangle", 120.0)
    s = build_scenario({"name": "spherical_triangle"})
    tri = s.boundary
    excess = tri.angle_excess()
    area = spherical_triangle_area(*tri.vertices)
    c.require(abs(excess - area) < 1e-9, f"angle excess {excess!r} vs area {area!r}")
    r = run_experiment(s, N, seed)
    c.require(r.chi == 1, "per-sample total mass is not exactly 1")
    bt = r.statistics["boundary_totals"]
    z = (bt["interior"] - 0.25) / bt["interior_stderr"]
    c.require(abs(z) < 3.0, f"interior mass {bt['interior']:.4f} is {z:.2f} sigma from 1/4")
    prof = r.statistics["oracle"][0]
    c.require(prof["max_abs_z"] < Z_GATE, f"interior profile max |z| {prof['max_abs_z']:.2f}")
    remainder = bt["vertices"] + bt["edges"]
    c.require(abs(bt["grand_total"] - 1.0) < 1e-12, "interior + boundary mass != 1")
    c.require(len(r.boundary.vertices) == 3 and len(r.boundary.edges) == 3,
              "boundary decomposition incomplete")
    c.details.update(samples=N, harriot_excess=excess, harriot_area=area,
                     interior=bt["interior"], interior_stderr=bt["interior_stderr"],
                     interior_profile_max_abs_z=prof["max_abs_z"], boundary_remainder=remainder,
                     vertex_masses=[v.mass for v in r.boundary.vertices],
                     edge_totals=[e.total for e in r.boundary.edges])
    return c.done()


def criterion_6(scale=1.0, seed=SEED):
    N = _n(100_000, scale)
    c = _Check(6, "product lemma", 300.0)
    ss = run_experiment(build_scenario({"name": "product",
                                        "params": {"factors": ["sphere", "sphere"]},
                                        "bins": {"u": 12, "v": 6}}), N, seed)
    fz = ss.statistics["factorization"]
    c.require(ss.chi == 4, "sphere x sphere per-sample sums are not all 4")
    c.require(fz["global_p"] > 1e-3, f"factorization global p {fz['global_p']:.3g} <= 0.001")
    c.require(fz["max_abs_z"] < Z_GATE, f"factorization max |z| {fz['max_abs_z']:.2f} >= 4")
    c.require(fz["n_bins_tested"] > 0, "no bin pair had enough atoms to test")
    st = run_experiment(build_scenario({"name": "product",
                                        "params": {"factors": ["sphere", "torus"]}}),
                        _n(20_000, scale), seed)
    c.require(st.chi == 0, "sphere x torus per-sample sums are not all 0")
    c.details.update(samples=N, sphere_sphere_chi=ss.chi, sphere_torus_chi=st.chi,
                     factorization={k: fz[k] for k in ("max_abs_z", "global_p", "global_df",
                                                       "n_bins_tested", "n_bins_excluded")})
    return c.done()


def block_product_check(s, n=1024, seed=SEED, opts=None):
    """Compare i1*i2 with the sign of the full 4x4 Hessian at interior pairs.

    This is an exactness check, so directions are drawn near the patch
    normal +-e5 where both blocks usually have an interior critical point.
    """
    opts = opts or SolverOptions()
    draw = s.draw(stream(seed, 1, 0), stream(seed, 2, 0), n)
    rng = stream(seed, ROLE_ORACLE, 7)
    for k in range(len(draw["A"])):
        a = 0.15 * rng.standard_normal((n, 5))
        a[:, 4] += rng.choice([-1.0, 1.0], n)
        draw["A"][k] = a / np.linalg.norm(a, axis=1, keepdims=True)
    fn = s.functions(draw)
    res = solve_product(fn, s.space, opts)
    b1, b2 = (b.crit for b in res.blocks)
    ok = res.status == OK
    k1 = np.flatnonzero((b1.kind == INTERIOR) & ok[b1.sample])
    k2 = np.flatnonzero((b2.kind == INTERIOR) & ok[b2.sample])
    i, j, smp = pair_rows(b1.sample[k1], b2.sample[k2], n)
    i, j = k1[i], k2[j]
    Z = np.concatenate([b1.cloc[i, :2], b2.cloc[j, :2]], 1)
    H = fn.full_hessian(Z, smp)
    mismatches = degenerate = 0
    for a in range(len(smp)):
        try:
            full = hessian_sign(H[a], opts.morse_gate)
        except DegenerateCritical:
            degenerate += 1
            continue
        mismatches += int(full != b1.index[i[a]] * b2.index[j[a]])
    return {"pairs": int(len(smp)), "mismatches": mismatches, "degenerate": degenerate}


def criterion_7(scale=1.0, seed=SEED):
    N = _n(100_000, scale)
    c = _Check(7, "combined-function decorrelation", 600.0)
    s = build_scenario({"name": "s4patch", "params": {"delta": 0.2}})
    margin = sectional_sign_margin(s)
    c.require(margin > 0, f"sectional sign margin {margin}")
    bp = block_product_check(s, n=_n(4096, scale), seed=seed)
    c.require(bp["pairs"] >= 100, f"only {bp['pairs']} interior critical pairs to compare")
    c.require(bp["mismatches"] == 0, f"{bp['mismatches']} block-product sign mismatches")
    r = run_experiment(s, N, seed)
    cov = r.statistics["covariance"]
    bad = [p for p in cov["pairs"] if not p["pass"]]
    c.require(not bad, f"{len(bad)} region pairs with |cov| >= 4 stderr")
    fz = r.statistics["factorization_interior"]
    c.require(fz["n_bins_tested"] > 0, "no interior bin pair had enough atoms to test")
    c.require(fz["max_abs_z"] < Z_GATE, f"interior-bin factorization max |z| {fz['max_abs_z']:.2f}")
    c.require(r.chi == 1, "per-sample s4patch sums are not all 1")
    c.details.update(samples=N, sign_margin=margin, block_product=bp,
                     covariance_max_abs_z=cov["max_abs_z"], covariance_degenerate=cov["n_degenerate"],
                     interior_factorization={k: fz.get(k) for k in (
                         "max_abs_z", "n_bins_tested", "n_bins_excluded", "global_p")})
    return c.done()


def criterion_8(scale=1.0, seed=SEED):
    N = _n(2000, scale)
    c = _Check(8, "determinism across thread counts", 180.0)
    differing = []
    for label, cfg in pe_suite():
        a = report_json(run_experiment(build_scenario(cfg), N, seed, threads=1))
        b = report_json(run_experiment(build_scenario(cfg), N, seed, threads=8))
        if a.encode() != b.encode():
            differing.append(label)
    c.details.update(samples=N, differing=differing)
    c.require(not differing, f"reports differ for {differing}")
    return c.done()


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8]


def run_all(scale=1.0, seed=SEED, stream_out=None):
    out = []
    for fn in CRITERIA:
        res = fn(scale=scale, seed=seed)
        out.append(res)
        if stream_out is not None:
            print(res.line(), file=stream_out, flush=True)
    return out
