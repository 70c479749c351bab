"""Batch front door: run verification suites and experiments from a JSON
config, emitting deterministic CSV/JSON tables.

Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
3 a standing hypothesis is violated (e.g. p = 1 for the gamma command).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .fields import GridDomain, DomainError, probe_field
from .functionals import IntegrandFunctional, PowerIntegrand
from .groups import GroupAxiomError
from .mollify import erode_domain
from .recovery import (HypothesisError, recover_integrand, constancy_probe,
                       gamma_experiment)
from .suites import (suite_axioms, suite_mollify, suite_functional,
                     suite_sandwich, suite_lsc)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_HYPOTHESIS = 0, 1, 2, 3

_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return _FMT % value
    return str(value)


def write_csv(path: str, rows: list, fieldnames: list):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def write_json(path: str, payload: dict):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _load(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "tol_scale", None) is not None:
        overrides["tol_scale"] = args.tol_scale
    return cfgmod.load_config(args.config, overrides)


# -- subcommands ---------------------------------------------------------------


def cmd_group_info(args) -> int:
    try:
        cfg = _load(args)
        spec = cfg["group"]
        group = cfgmod.build_group(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    brackets = [
        {"i": int(i) + 1, "j": int(j) + 1, "l": int(l) + 1, "c": float(group.c[i, j, l])}
        for i, j, l in zip(*np.nonzero(group.c)) if i < j
    ]
    report = {
        "group": spec if isinstance(spec, str) else spec.get("name", "custom"),
        "n": group.n,
        "m": group.m,
        "k": group.step,
        "Q": group.homogeneous_dimension(),
        "weights": group.weights.tolist(),
        "brackets": brackets,
        "axiom_violations": group.axiom_violations(),
    }
    print(json.dumps(report, indent=2))
    if args.out:
        write_json(os.path.join(args.out, "group_info.json"), report)
    return EXIT_OK if not report["axiom_violations"] else EXIT_CONFIG


def _run_suite(cfg: dict, suite: str) -> list:
    group = cfgmod.build_group(cfg)
    norm = cfgmod.build_norm(cfg, group)
    grid = cfgmod.build_grid(cfg, group)
    rng = np.random.default_rng(int(cfg["seed"]))
    scale = float(cfg["tol_scale"])
    eps = [float(e) for e in cfg["schedules"].get("eps", [])]
    if suite == "axioms":
        rows = suite_axioms(group, norm, rng, samples=1000, tol=1e-12 * scale)
    elif suite == "mollify":
        if not eps:
            raise ConfigError("mollify suite needs a nonempty eps schedule")
        mollifier = cfgmod.build_mollifier(cfg, norm)
        rows = suite_mollify(group, norm, mollifier, grid, rng, eps_list=eps,
                             p=float(cfg["p"]))
    elif suite == "functional":
        functional = cfgmod.build_functional(cfg, group)
        if not isinstance(functional, IntegrandFunctional):
            raise ConfigError("the functional suite needs a built-from-integrand functional")
        rows = suite_functional(group, functional.integrand, grid, rng,
                                samples=int(cfg["samples"]))
    elif suite == "sandwich":
        if not eps:
            raise ConfigError("sandwich suite needs a nonempty eps schedule")
        mollifier = cfgmod.build_mollifier(cfg, norm)
        inner = erode_domain(group, norm, grid, 1.1 * max(eps))
        if inner.is_empty:
            raise ConfigError("eps schedule leaves no room for an inner domain")
        rows = suite_sandwich(group, norm, mollifier, grid, inner, rng, eps_list=eps)
    elif suite == "lsc":
        rows = suite_lsc(group, grid, rng, h_list=[int(h) for h in cfg["schedules"]["h"]])
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    return rows


def cmd_verify(args) -> int:
    try:
        cfg = _load(args)
        rows = _run_suite(cfg, args.suite)
    except (ConfigError, GroupAxiomError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for row in rows:
        status = "pass" if row["passed"] else "FAIL"
        print(f"{status:5s} {row['name']:40s} value={row['value']:.6g} tol={row['tolerance']:.6g}")
    if args.out:
        write_csv(os.path.join(args.out, f"verify_{args.suite}.csv"), rows,
                  ["name", "value", "tolerance", "passed"])
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def cmd_recover(args) -> int:
    try:
        cfg = _load(args)
        group = cfgmod.build_group(cfg)
        norm = cfgmod.build_norm(cfg, group)
        functional = cfgmod.build_functional(cfg, group)
        xi_grid = cfgmod.build_xi_grid(cfg, group)
        rspec = cfg["recovery"]
        base = GridDomain.ball(norm, group.origin(), float(rspec["ball_radius"]),
                               int(rspec["cells_per_axis"]))
    except (ConfigError, GroupAxiomError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec = recover_integrand(functional, group, base, xi_grid)
    defects = rec.pointwise_convexity_defect()
    growth = getattr(functional, "growth", None)
    slack = rec.growth_slack(growth) if growth is not None else np.full(len(xi_grid), np.nan)

    rows = []
    for k in range(len(xi_grid)):
        row = {f"xi_{j + 1}": float(xi_grid[k, j]) for j in range(group.m)}
        row.update({"f_rec": float(rec.values[k]),
                    "convexity_violation": float(defects[k]),
                    "growth_slack": float(slack[k])})
        rows.append(row)
    fieldnames = [f"xi_{j + 1}" for j in range(group.m)] + [
        "f_rec", "convexity_violation", "growth_slack"]

    xi0 = np.zeros(group.m)
    xi0[0] = 1.0
    centers = np.zeros((2, group.n))
    centers[1, 0] = 1.5
    probe = constancy_probe(functional, group, norm, xi0, centers,
                            [float(r) for r in cfg["schedules"]["rho"]],
                            cells_per_axis=int(rspec["cells_per_axis"]))
    summary = {
        "max_convexity_violation": float(defects.max()),
        "min_growth_slack": float(np.nanmin(slack)),
        "constancy_spread": probe["spreads"],
        "constancy_max_spread": probe["max_spread"],
        "probes": len(xi_grid),
    }
    print(json.dumps(summary, indent=2, default=_json_default))
    if args.out:
        write_csv(os.path.join(args.out, "recovered.csv"), rows, fieldnames)
        write_json(os.path.join(args.out, "recover_summary.json"), summary)
    return EXIT_OK


def cmd_gamma(args) -> int:
    try:
        cfg = _load(args)
        group = cfgmod.build_group(cfg)
        norm = cfgmod.build_norm(cfg, group)
        grid = cfgmod.build_grid(cfg, group)
        sequence = cfgmod.build_gamma_sequence(cfg, group)
        xi_grid = cfgmod.build_xi_grid(cfg, group)
        settings = cfgmod.build_minimizer_settings(cfg)
        rspec = cfg["recovery"]
        base = GridDomain.ball(norm, group.origin(), float(rspec["ball_radius"]),
                               int(rspec["cells_per_axis"]))
        fields = cfgmod.build_fields(cfg, group)
    except (ConfigError, GroupAxiomError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = gamma_experiment(group, sequence, fields, grid,
                                  float(cfg["schedules"]["delta"]), float(cfg["p"]),
                                  base, xi_grid, settings)
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS

    rows = []
    for entry in report["entries"]:
        for per in entry["fields"]:
            rows.append({"h": entry["h"], "field": per["field"],
                         "lower": per["lower"], "upper": per["upper"],
                         "converged": per["converged"],
                         "cauchy_gap": entry["cauchy_gap"]})
    limit = report["limit"]
    limit_rows = [dict({f"xi_{j + 1}": float(limit.xi[k, j]) for j in range(group.m)},
                       f_limit=float(limit.values[k])) for k in range(len(limit.xi))]
    summary = {
        "h_schedule": [e["h"] for e in report["entries"]],
        "limit_convexity_violation": report["limit_convexity_violation"],
        "limit_growth_slack_min": report["limit_growth_slack_min"],
        "bracket_ok": all(r["lower"] <= r["upper"] + 1e-12 for r in rows),
    }
    print(json.dumps(summary, indent=2, default=_json_default))
    if args.out:
        write_csv(os.path.join(args.out, "gamma_brackets.csv"), rows,
                  ["h", "field", "lower", "upper", "converged", "cauchy_gap"])
        write_csv(os.path.join(args.out, "gamma_limit.csv"), limit_rows,
                  [f"xi_{j + 1}" for j in range(group.m)] + ["f_limit"])
        write_json(os.path.join(args.out, "gamma_summary.json"), summary)
    return EXIT_OK if summary["bracket_ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=None, help="JSON config path")
    shared.add_argument("--out", default=None, help="output directory for CSV/JSON")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--threads", type=int, default=1,
                        help="accepted for interface stability; execution is single-threaded")
    shared.add_argument("--tol-scale", type=float, default=None, dest="tol_scale")
    parser = argparse.ArgumentParser(
        prog="carnot",
        description="verification suites and experiments for left-invariant "
                    "integral functionals on stratified groups")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("group-info", parents=[shared],
                   help="group constants, Q and axiom summary")
    verify = sub.add_parser("verify", parents=[shared], help="run a verification suite")
    verify.add_argument("--suite", required=True,
                        choices=["axioms", "mollify", "functional", "sandwich", "lsc"])
    sub.add_parser("recover", parents=[shared],
                   help="probe-recover the integrand of the configured functional")
    sub.add_parser("gamma", parents=[shared],
                   help="variational-limit bracketing experiment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"group-info": cmd_group_info, "verify": cmd_verify,
                "recover": cmd_recover, "gamma": cmd_gamma}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
