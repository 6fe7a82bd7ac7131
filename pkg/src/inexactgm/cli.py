"""Command-line harness: ``inexactgm solve|verify|sweep|list-problems|oracle-check``.

Exit codes: 0 success, 1 configuration or input error, 2 the run stopped
on a cap (``solve``) or a check failed (``oracle-check``).
"""

import argparse
import configparser
import csv
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .exceptions import CapabilityError
from .oracles import oracle_contract_check
from .problems import PROBLEM_NAMES, build_problem
from .solver import SolverConfig, solve, verify_trace
from .spaces import get_setup
from .traceio import (TraceFormatError, format_trace, params_from_meta, read_trace,
                      write_report)

RUN_DEFAULTS = {
    "problem": None,
    "setup": None,
    "eps": 1e-3,
    "delta_u": 0.0,
    "delta_pu": 0.0,
    "l0": 1.0,
    "x0": "default",
    "max_iters": 1000,
    "max_doublings": 60,
    "seed": 0,
    "out": None,
    "report": None,
}
_FLOAT_KEYS = ("eps", "delta_u", "delta_pu", "l0")
_INT_KEYS = ("max_iters", "max_doublings", "seed")

SWEEP_SUMMARY_COLUMNS = ("cell", "problem", "epsilon", "delta_u", "delta_pu", "stop_reason",
                         "N", "inner_checks", "best_gmap_norm", "trace", "error")


class ConfigError(ValueError):
    pass


def _add_run_flags(p):
    p.add_argument("--config", help="INI file with a [run] section")
    p.add_argument("--problem", help="catalog problem name")
    p.add_argument("--setup", help="prox setup (default: the problem's own)")
    p.add_argument("--eps", type=float, help="target on the gradient-mapping norm")
    p.add_argument("--delta-u", dest="delta_u", type=float, help="uncontrolled oracle error")
    p.add_argument("--delta-pu", dest="delta_pu", type=float, help="uncontrolled prox error")
    p.add_argument("--l0", type=float, help="initial guess of the quadratic constant")
    p.add_argument("--x0", help="'default', 'center' or comma-separated coordinates")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--max-doublings", dest="max_doublings", type=int)
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="inexactgm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the adaptive method once")
    _add_run_flags(p)
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--report", help="bound report JSON path")

    p = sub.add_parser("verify", help="recompute all bounds from a saved trace")
    p.add_argument("trace")
    p.add_argument("--report", help="write the bound report JSON here")

    p = sub.add_parser("sweep", help="grid of runs, one trace per cell")
    _add_run_flags(p)
    p.add_argument("--eps-list", help="comma-separated epsilons")
    p.add_argument("--delta-u-list", help="comma-separated delta_u values")
    p.add_argument("--delta-pu-list", help="comma-separated delta_pu values")
    p.add_argument("--nu-list", help="Hölder exponents (13, 12, 1 or 1/3, 1/2, 1); "
                                     "selects holder-nu-* problems")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)

    sub.add_parser("list-problems", help="print the catalog")

    p = sub.add_parser("oracle-check", help="statistical check of the oracle contract")
    p.add_argument("--problem", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-u", dest="delta_u", type=float, default=0.0)
    return parser


# ---------------------------------------------------------------------------
# configuration


def read_config_file(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section != "run":
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, raw in cp.items(section):
            norm = key.replace("-", "_")
            if norm not in RUN_DEFAULTS:
                raise ConfigError(f"unknown key {key!r} in {path}; "
                                  f"valid: {', '.join(RUN_DEFAULTS)}")
            values[norm] = raw
    return values


def resolve_run_options(args):
    """Merge defaults, config file and flags (flags win) and type-check."""
    opts = dict(RUN_DEFAULTS)
    if getattr(args, "config", None):
        opts.update(read_config_file(args.config))
    for key in RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    try:
        for key in _FLOAT_KEYS:
            opts[key] = float(opts[key])
        for key in _INT_KEYS:
            opts[key] = int(opts[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric option: {exc}") from exc
    if not opts["problem"]:
        raise ConfigError(f"--problem is required; valid: {', '.join(PROBLEM_NAMES)}")
    if opts["problem"] not in PROBLEM_NAMES:
        raise ConfigError(f"unknown problem {opts['problem']!r}; "
                          f"valid: {', '.join(PROBLEM_NAMES)}")
    if opts["setup"]:
        try:
            get_setup(opts["setup"])
        except CapabilityError as exc:
            raise ConfigError(str(exc)) from exc
    if not opts["eps"] > 0 or not opts["l0"] > 0:
        raise ConfigError("--eps and --l0 must be positive")
    if opts["delta_u"] < 0 or opts["delta_pu"] < 0:
        raise ConfigError("--delta-u and --delta-pu must be non-negative")
    if opts["max_iters"] < 1 or opts["max_doublings"] < 1:
        raise ConfigError("iteration caps must be at least 1")
    if opts["seed"] < 0:
        raise ConfigError("--seed must be non-negative")
    return opts


def _resolve_x0(value, problem):
    if value == "default":
        return problem.x0.copy()
    if value == "center":
        fset = problem.fset
        if fset.kind == "simplex":
            return np.full(fset.dim, 1.0 / fset.dim)
        if fset.kind == "ball":
            return fset.center.copy()
        return fset.project(np.zeros(fset.dim))
    try:
        x0 = np.array([float(t) for t in str(value).split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad --x0 {value!r}") from exc
    if x0.size != problem.fset.dim:
        raise ConfigError(f"--x0 has {x0.size} coordinates, problem needs {problem.fset.dim}")
    if not problem.fset.contains(x0, tol=1e-9):
        raise ConfigError("--x0 lies outside the feasible set")
    return x0


def prepare_run(opts):
    """Build ``(problem, setup, config)`` from resolved options."""
    problem = build_problem(opts["problem"], delta_u=opts["delta_u"], seed=opts["seed"])
    try:
        setup = get_setup(opts["setup"] or problem.setup_name)
    except CapabilityError as exc:
        raise ConfigError(str(exc)) from exc
    x0 = _resolve_x0(opts["x0"], problem)
    config = SolverConfig(epsilon=opts["eps"], x0=x0, L0=opts["l0"],
                          delta_u=max(opts["delta_u"], problem.delta_u),
                          delta_pu=opts["delta_pu"], max_outer_iterations=opts["max_iters"],
                          max_inner_doublings=opts["max_doublings"], seed=opts["seed"])
    try:
        config.validate(problem.fset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return problem, setup, config


def run_meta(problem, setup, config, report):
    params = problem.bound_params(config, psi_x0=report.psi_x0)
    return {
        "problem": problem.name,
        "setup": setup.name,
        "epsilon": config.epsilon,
        "delta_u": config.delta_u,
        "delta_pu": config.delta_pu,
        "L0": config.L0,
        "seed": config.seed,
        "psi_x0": params.psi_x0,
        "psi_star": params.psi_star,
        "lipschitz": params.lipschitz,
        "nu": params.nu,
        "l_nu": params.l_nu,
        "stop_reason": report.stop_reason,
        "K": report.K,
        "N": report.N,
    }


def execute(opts):
    """Run one solve; returns ``(report, meta, checks)``."""
    problem, setup, config = prepare_run(opts)
    report = solve(problem, setup, config)
    meta = run_meta(problem, setup, config, report)
    checks = verify_trace(report.trace, params_from_meta(meta)) if report.trace else []
    return report, meta, checks


def _print_checks(checks):
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: observed={c.observed!r} bound={c.bound_value!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    opts = resolve_run_options(args)
    try:
        report, meta, checks = execute(opts)
    except CapabilityError as exc:
        raise ConfigError(str(exc)) from exc
    if opts["out"]:
        with open(opts["out"], "w", newline="") as fh:
            fh.write(format_trace(report.trace, meta))
    if opts["report"]:
        write_report(opts["report"], checks)
    print(f"{meta['problem']}: {report.stop_reason} after {report.N} iterations, "
          f"{report.inner_checks} checks, best gradient-mapping norm {report.best_gmap_norm!r}")
    _print_checks(checks)
    return 0 if report.stop_reason == "criterion-met" else 2


def cmd_verify(args):
    try:
        trace, meta = read_trace(args.trace)
        if not trace:
            raise TraceFormatError("trace has no iterations")
        params = params_from_meta(meta)
    except (OSError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    checks = verify_trace(trace, params)
    _print_checks(checks)
    if args.report:
        write_report(args.report, checks)
    return 0 if all(c.passed for c in checks) else 2


def _float_list(text, name):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {name}: {text!r}") from exc


_NU_TAGS = {"13": "13", "1/3": "13", "12": "12", "1/2": "12", "0.5": "12", "1": "1", "1.0": "1"}


def sweep_cells(args, opts):
    eps_list = _float_list(args.eps_list, "--eps-list") if args.eps_list else [opts["eps"]]
    du_list = (_float_list(args.delta_u_list, "--delta-u-list") if args.delta_u_list
               else [opts["delta_u"]])
    dpu_list = (_float_list(args.delta_pu_list, "--delta-pu-list") if args.delta_pu_list
                else [opts["delta_pu"]])
    if args.nu_list:
        problems = []
        for tok in args.nu_list.split(","):
            tag = _NU_TAGS.get(tok.strip())
            if tag is None:
                raise ConfigError(f"unsupported nu {tok!r}; valid: 1/3, 1/2, 1")
            problems.append(f"holder-nu-{tag}")
    else:
        problems = [opts["problem"]]
    cells = []
    for idx, (prob, eps, du, dpu) in enumerate(itertools.product(problems, eps_list,
                                                                 du_list, dpu_list)):
        cell = dict(opts, problem=prob, eps=eps, delta_u=du, delta_pu=dpu)
        if not eps > 0 or du < 0 or dpu < 0:
            raise ConfigError(f"invalid sweep cell {idx}")
        cells.append(cell)
    return cells


def _run_cell(idx, cell, out_dir):
    path = os.path.join(out_dir, f"cell-{idx:03d}.csv")
    row = {"cell": idx, "problem": cell["problem"], "epsilon": repr(cell["eps"]),
           "delta_u": repr(cell["delta_u"]), "delta_pu": repr(cell["delta_pu"]),
           "stop_reason": "", "N": "", "inner_checks": "", "best_gmap_norm": "",
           "trace": os.path.basename(path), "error": ""}
    try:
        report, meta, _ = execute(cell)
        with open(path, "w", newline="") as fh:
            fh.write(format_trace(report.trace, meta))
        row.update(stop_reason=report.stop_reason, N=report.N,
                   inner_checks=report.inner_checks,
                   best_gmap_norm=repr(float(report.best_gmap_norm)))
    except Exception as exc:  # a failed cell is recorded, not fatal
        row.update(error=f"{type(exc).__name__}: {exc}", trace="")
    return row


def cmd_sweep(args):
    if not args.problem and args.nu_list:
        args.problem = "holder-nu-1"
    opts = resolve_run_options(args)
    cells = sweep_cells(args, opts)
    os.makedirs(args.out_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda ic: _run_cell(ic[0], ic[1], args.out_dir),
                             enumerate(cells)))
    summary = os.path.join(args.out_dir, "summary.csv")
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} cells, {failed} failed; summary in {summary}")
    return 0 if failed == 0 else 2


def cmd_list_problems(args):
    for name in PROBLEM_NAMES:
        p = build_problem(name)
        print(f"{name:20s} [{p.setup_name}] {p.description}")
    return 0


def cmd_oracle_check(args):
    if args.problem not in PROBLEM_NAMES:
        raise ConfigError(f"unknown problem {args.problem!r}; valid: {', '.join(PROBLEM_NAMES)}")
    problem = build_problem(args.problem, delta_u=args.delta_u, seed=args.seed)
    rep = oracle_contract_check(problem.oracle, trials=args.trials, seed=args.seed,
                                setup=problem.setup)
    print(f"{problem.name}: {rep}")
    return 0 if rep.passed else 2


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "list-problems": cmd_list_problems,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; map to the config-error code
        return 0 if exc.code == 0 else 1
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
