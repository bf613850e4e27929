"""Command-line entry point: ``distkf {validate,graph,gains,simulate,compare}``.

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .gains import GainError, GainSchedule, precompute_schedule
from .model import RngStream
from .network import GraphError, generate, write_edge_list

log = logging.getLogger("distkf")


def _validate(args) -> int:
    try:
        scn = harness.validate(harness.load_config(args.config))
    except harness.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    for w in scn.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"ok: {scn.config.name} (N={scn.config.N}, M={scn.config.M}, hash {scn.config_hash[:12]})")
    return 0


def _graph(args) -> int:
    try:
        net = generate(args.kind, args.n, RngStream(args.seed, 0, "scenario:graph"),
                       p=args.p, radius=args.radius, mean_degree=args.mean_degree)
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_edge_list(net, args.out)
    return 0


def _gains(args) -> int:
    try:
        scn = harness.validate(harness.load_config(args.config))
    except harness.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    pr = scn.problem
    sched = precompute_schedule(pr.model, pr.suite, pr.network, pr.pseudo,
                                scn.config.gain_config(args.estimator), args.estimator)
    sched.save(args.out)
    print(f"wrote {args.estimator} schedule (T={sched.T}) to {args.out}")
    return 0


def _simulate(args) -> int:
    try:
        cfg = harness.load_config(args.config)
        sched = GainSchedule.load(args.schedule) if args.schedule else None
        report = harness.run(cfg, threads=args.threads, schedule=sched)
    except harness.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    harness.emit(report, args.out)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for est, res in report.results.items():
        print(f"{est:5s} final MSE {res.mse_avg[-1]:.6g} ({harness.mse_db(res.mse_avg[-1]) or float('nan'):.3f} dB)")
    return 0


def _compare(args) -> int:
    try:
        cfgs = [harness.load_config(p) for p in args.configs]
        harness.compare(cfgs, args.out, threads=args.threads)
    except harness.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distkf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("validate", help="check a scenario file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=_validate)

    s = sub.add_parser("graph", help="generate a communication graph as an edge list")
    s.add_argument("--kind", required=True,
                   choices=["path", "cycle", "complete", "grid", "erdos_renyi", "geometric"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=float)
    s.add_argument("--radius", type=float)
    s.add_argument("--mean-degree", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_graph)

    s = sub.add_parser("gains", help="precompute and save a gain schedule")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--estimator", default="cikf", choices=["cikf", "dikf", "pikf"])
    s.set_defaults(func=_gains)

    s = sub.add_parser("simulate", help="Monte-Carlo run; writes mse.csv, summary.json, config.echo")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--schedule")
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=_simulate)

    s = sub.add_parser("compare", help="run several scenarios and merge their CSVs")
    s.add_argument("--out", required=True)
    s.add_argument("--configs", nargs="+", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GainError, harness.ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
