"""Command line entry point: simulate, oracle, frontier, bounds.

Exit status is 0 on success, 1 on configuration errors and 2 when an oracle
verification reports violations.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from . import analysis, oracle
from .config import ConfigError, ExperimentConfig, emit_config, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (drawn from entropy if omitted)")
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("--trace", help="per-round CSV trace of replication 0")
    common.add_argument("--reps", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--T", type=int)
    common.add_argument("--epsilon")
    common.add_argument("--rho")

    p = argparse.ArgumentParser(prog="robust-auction", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run replicated experiments")
    o = sub.add_parser("oracle", parents=[common], help="exhaustive lemma verification")
    o.add_argument("--grid", type=int, default=5, help="number of grid points on [0, 1]")
    o.add_argument("--k", type=_int_list, default=[1, 2, 3], help="comma-separated lookaheads")
    f = sub.add_parser("frontier", parents=[common], help="alpha/beta frontier sweep")
    f.add_argument("--eps-list", type=_float_list, default=[f"0.{i}" for i in range(1, 10)])
    b = sub.add_parser("bounds", parents=[common], help="ex-post IR revenue bound table")
    b.add_argument("--k", type=_int_list, default=[1, 2, 4, 8])
    b.add_argument("--mu", default="1", help="mean value; 'e' for Euler's number")
    return p


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    doc = dict(doc)
    # flags override file values
    for flag, key in (("T", "T"), ("reps", "reps"), ("seed", "seed"), ("threads", "threads"),
                      ("trace", "trace"), ("out", "out")):
        val = getattr(args, flag)
        if val is not None:
            doc[key] = val
    if args.epsilon is not None or args.rho is not None:
        mech = dict(doc.get("mechanism") or {})
        if args.epsilon is not None:
            mech["epsilon"] = args.epsilon
        if args.rho is not None:
            mech["rho"] = args.rho
        doc["mechanism"] = mech
    return parse_config(doc)


def _ensure_seed(seed):
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % 2**63)
        print(f"seed: {seed}", file=sys.stderr)
    return seed


def cmd_simulate(args) -> int:
    from .simulator import run_experiment

    cfg = _load_config(args)
    cfg.seed = _ensure_seed(cfg.seed)
    report = run_experiment(cfg)
    doc = report.to_dict()
    doc["config"] = emit_config(cfg)
    with _output(cfg.out) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    eps = Fraction(args.epsilon or "0.5")
    T = args.T or 8
    try:
        mech, dist = oracle.desk_instance(args.grid, T, eps, args.rho)
    except ValueError as exc:
        raise ConfigError([f"oracle: {exc}"]) from None
    reports = [oracle.verify_good_persistence(mech, dist, k_values=args.k)]
    delta_ok = 0 < mech.params.rho <= mech.params.lookahead_rho_bound
    for k in (k for k in args.k if k >= 1):
        for t in range(1, T):
            reports.append(oracle.verify_border_dominance(mech, dist, k, t))
            if delta_ok:
                reports.append(oracle.verify_delta_positive(mech, dist, k, t))
    rhos = [i / 10 for i in range(1, 11)]
    errors = [oracle.geometric_truncated_mean(r, k).error for r in rhos for k in range(1, 11)]
    geometric_ok = max(errors) <= 1e-12
    ok = all(r.ok for r in reports) and geometric_ok
    doc = {
        "instance": {"grid": args.grid, "T": T, "epsilon": str(eps), "rho": str(mech.params.rho), "k": args.k},
        "ok": ok,
        "reports": [r.to_dict() for r in reports],
        "geometric": {"cases": len(errors), "max_error": max(errors), "ok": geometric_ok},
    }
    if not delta_ok:
        doc["notes"] = ["rho outside (0, eps/(2-eps)]: delta check skipped"]
    with _output(args.out) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if not ok:
        bad = sum(len(r.violations) for r in reports)
        print(f"verification failed: {bad} violations", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_frontier(args) -> int:
    out = args.out
    args.out = None
    cfg = _load_config(args)
    cfg.seed = _ensure_seed(cfg.seed)
    points = analysis.frontier_sweep(args.eps_list, cfg)
    with _output(out) as fh:
        analysis.write_frontier_csv(points, fh)
    return EXIT_OK


def cmd_bounds(args) -> int:
    mu = math.e if args.mu == "e" else float(args.mu)
    try:
        rows = analysis.expost_bound_table(args.k, mu)
    except ValueError as exc:
        raise ConfigError([f"bounds: {exc}"]) from None
    with _output(args.out) as fh:
        analysis.write_bounds_csv(rows, fh)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "oracle": cmd_oracle, "frontier": cmd_frontier, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
