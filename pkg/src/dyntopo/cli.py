"""Command-line interface: run experiments, extract schedule-quality windows,
and sweep degree bounds.

Exit codes: 0 success, 2 configuration error, 3 infeasible run (generation
could not satisfy its constraints).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

from . import harness
from .harness import ConfigError
from .topology import GenerationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config (see README schema)")
    p.add_argument("--profile", choices=sorted(harness.PROFILES),
                   help="built-in config profile")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes for cost evaluation")


def _resolve_config(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.load_config(args.config)
    elif args.profile:
        cfg = harness.PROFILES[args.profile]()
    else:
        raise ConfigError("provide --config or --profile")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    report = harness.run(cfg, out_dir=args.out, workers=args.workers)
    for s in report.summaries():
        print(
            f"{s.policy:12s} total={s.total:14.2f} op={s.operation:14.2f} "
            f"trans={s.transition:12.2f} moves={s.transitions}"
        )
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_quality(args) -> int:
    sched_path = os.path.join(args.run_dir, "schedules.csv")
    if not os.path.exists(sched_path):
        raise ConfigError(f"no schedules.csv under {args.run_dir}")
    traces: dict[str, dict[int, int]] = {}
    with open(sched_path) as fh:
        for row in csv.DictReader(fh):
            traces.setdefault(row["policy"], {})[int(row["t"])] = int(
                row["topology_index"]
            )
    policies = args.policies.split(",") if args.policies else sorted(traces)
    missing = [p for p in policies if p not in traces]
    if missing:
        raise ConfigError(f"policies not in run: {missing}")
    steps = len(next(iter(traces.values())))
    if args.start < 0 or args.start + args.length > steps:
        raise ConfigError(f"window out of range for {steps} steps")
    out_path = args.out or os.path.join(args.run_dir, "quality.csv")
    with open(out_path, "w") as fh:
        fh.write("t," + ",".join(policies) + "\n")
        for t in range(args.start, args.start + args.length):
            fh.write(f"{t}," + ",".join(str(traces[p][t]) for p in policies) + "\n")
    print(f"quality table written to {out_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    bounds = [int(b) for b in args.bounds.split(",")]
    base_seed = cfg.feasible_set.seed if cfg.seed is None else cfg.seed
    seeds = [base_seed + 10 * k for k in range(args.seeds)]
    rows = harness.degree_sweep(cfg, bounds, seeds, workers=args.workers)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    harness.sweep_to_csv(rows, args.out)
    for bound, total in harness.best_policy_totals(rows).items():
        print(f"bound {bound}: best-policy total {total:.2f}")
    print(f"sweep table written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyntopo",
        description="Dynamic topology reconfiguration simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write a report")
    _add_common(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_q = sub.add_parser("quality", help="windowed topology traces from a run")
    p_q.add_argument("--run-dir", required=True, help="directory of a prior run")
    p_q.add_argument("--start", type=int, default=0)
    p_q.add_argument("--length", type=int, default=1000)
    p_q.add_argument("--policies", help="comma-separated policy subset")
    p_q.add_argument("--out", help="output CSV (default <run-dir>/quality.csv)")
    p_q.set_defaults(func=cmd_quality)

    p_s = sub.add_parser("sweep", help="re-run per degree bound")
    _add_common(p_s)
    p_s.add_argument("--bounds", default="3,5,7", help="comma-separated bounds")
    p_s.add_argument("--seeds", type=int, default=3, help="number of seeds")
    p_s.add_argument("--out", required=True, help="output CSV path")
    p_s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationError as exc:
        print(f"infeasible run: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
