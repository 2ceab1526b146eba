"""``indexcurv`` command line: run, catalog, verify, oracle.

Exit status: 0 on success, 1 when a checked property fails, 2 on a config
error.  Diagnostics go to stderr; run results go to files in ``--out``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import yaml

from .critical import SolverOptions
from .expectation import ExcessiveRejection, run_experiment, write_outputs
from .scenarios import InvalidParameter, UnknownScenario, build_scenario, catalog

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

TOP_KEYS = {"scenario", "run", "solver", "bins", "emit"}
SCENARIO_KEYS = {"name", "params"}
RUN_KEYS = {"samples", "seed", "threads", "out_dir"}
BIN_KEYS = {"u", "v", "edge", "regions"}
EMIT_KEYS = {"json", "csv", "plotdata"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: dict = field(default_factory=lambda: {"name": "sphere"})
    samples: int = 10_000
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    solver: SolverOptions = field(default_factory=SolverOptions)
    bins: dict = field(default_factory=dict)
    emit: dict = field(default_factory=lambda: {"json": True, "csv": True, "plotdata": True})


def _section(tree, key, allowed):
    sec = tree.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    bad = set(sec) - allowed
    if bad:
        raise ConfigError(f"unknown key(s) in '{key}': {', '.join(sorted(bad))}")
    return sec


def parse_config(tree):
    """Validate a config tree (all keys checked before anything runs)."""
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError("config must be a mapping at the top level")
    bad = set(tree) - TOP_KEYS
    if bad:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(bad))}")
    sc = _section(tree, "scenario", SCENARIO_KEYS)
    run = _section(tree, "run", RUN_KEYS)
    bins = _section(tree, "bins", BIN_KEYS)
    emit = _section(tree, "emit", EMIT_KEYS)
    try:
        solver = SolverOptions.from_dict(_section(tree, "solver", set(SolverOptions().to_dict())))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    cfg = RunConfig(solver=solver, bins=dict(bins))
    if sc:
        cfg.scenario = {"name": sc.get("name"), "params": dict(sc.get("params") or {})}
    for key in ("samples", "seed", "threads"):
        if key in run:
            val = run[key]
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"run.{key} must be an integer")
            setattr(cfg, key, val)
    if "out_dir" in run:
        cfg.out_dir = str(run["out_dir"])
    for key, val in emit.items():
        if not isinstance(val, bool):
            raise ConfigError(f"emit.{key} must be true or false")
        cfg.emit[key] = val
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg):
    if cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    if not (0 <= cfg.seed < 2 ** 64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")


def load_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            tree = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(tree)


def _build(cfg):
    try:
        return build_scenario({**cfg.scenario, "bins": cfg.bins})
    except (UnknownScenario, InvalidParameter) as exc:
        raise ConfigError(str(exc.args[0] if exc.args else exc)) from None


def _parser():
    p = argparse.ArgumentParser(prog="indexcurv",
                                description="Monte Carlo index-expectation curvature engine")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML (or JSON) config file")
    common.add_argument("--scenario", help="scenario name (overrides the config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int)
    sub.add_parser("run", parents=[common], help="run one experiment and write reports")
    sub.add_parser("catalog", help="list the shipped scenarios")
    v = sub.add_parser("verify", parents=[common], help="acceptance suite at reduced N")
    v.add_argument("--scale", type=float, default=0.3,
                   help="fraction of the full sample counts (default 0.3)")
    sub.add_parser("oracle", parents=[common], help="print analytic oracle values")
    return p


def _config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.scenario:
        if cfg.scenario.get("name") != args.scenario:
            cfg.scenario = {"name": args.scenario, "params": {}}
    for key, attr in (("seed", "seed"), ("samples", "samples"), ("threads", "threads")):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, attr, val)
    if args.out:
        cfg.out_dir = args.out
    _check_ranges(cfg)
    return cfg


def cmd_run(args):
    cfg = _config_from_args(args)
    scenario = _build(cfg)
    timing = {}
    try:
        report = run_experiment(scenario, cfg.samples, cfg.seed, opts=cfg.solver,
                                threads=cfg.threads,
                                regions=int(cfg.bins.get("regions", 3)),
                                edge_bins=int(cfg.bins.get("edge", 16)), timing=timing)
    except ExcessiveRejection as exc:
        print(f"indexcurv: {exc}", file=sys.stderr)
        return EXIT_FAIL
    timing.update(scenario=scenario.name, samples=cfg.samples, threads=cfg.threads)
    paths = write_outputs(report, cfg.out_dir, json_out=cfg.emit["json"],
                          csv_out=cfg.emit["csv"], plot_out=cfg.emit["plotdata"], timing=timing)
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    if report.chi is None or report.chi_violations:
        print("indexcurv: per-sample index sums differ from the Euler characteristic",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_catalog(args):
    for name, doc in catalog().items():
        print(f"{name:20s} {doc}")
    return EXIT_OK


def cmd_verify(args):
    from .acceptance import SEED, run_all
    if args.scale <= 0:
        raise ConfigError("--scale must be positive")
    seed = SEED if args.seed is None else args.seed
    results = run_all(scale=args.scale, seed=seed, stream_out=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def oracle_values(scenario):
    """Analytic oracle values of a scenario as a JSON-friendly dict."""
    s = scenario
    out = {"scenario": s.name, "chi": s.chi, "e": s.e}
    if s.vertex_oracle is not None:
        from .geometry.domains import normal_cone_mass, alpha_over_pi_weight
        poly = s.boundary
        n = poly.n_vertices
        out["vertex_masses"] = [normal_cone_mass(poly, i) for i in range(n)]
        out["vertex_reference_alpha_over_pi"] = [alpha_over_pi_weight(poly, i) for i in range(n)]
    if s.interior_oracle is not None:
        out["interior_mass"] = s.interior_oracle
    if s.edge_oracle is not None:
        out["edge_masses"] = list(s.edge_oracle)
    out["bin_oracle_totals"] = [None if o is None else float(sum(o)) for o in s.oracles]
    return out


def cmd_oracle(args):
    cfg = _config_from_args(args)
    vals = oracle_values(_build(cfg))
    for key, val in vals.items():
        if isinstance(val, list):
            val = " ".join("null" if x is None else repr(float(x)) for x in val)
        print(f"{key}: {val}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "catalog": cmd_catalog, "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"indexcurv: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
