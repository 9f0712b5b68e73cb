"""Command-line experiment runner.

Subcommands:
  train  --config FILE [--seed N] [--out DIR]
  sweep  --config FILE --seeds a,b,c [--jobs N] [--out DIR]
  report --in DIR --out DIR

Exit codes: 0 success, 1 configuration error, 2 run failure.
The CGR_LOG environment variable (quiet/info/trace) controls verbosity;
trace additionally writes per-step confidence logs.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .config import ConfigError, parse_config


def _parser():
    p = argparse.ArgumentParser(prog="cgr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a single training run")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default=None)

    s = sub.add_parser("sweep", help="run variants x seeds and aggregate")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", required=True, help="comma-separated seed list")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)

    r = sub.add_parser("report", help="aggregate an existing results directory")
    r.add_argument("--in", dest="in_dir", required=True)
    r.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        harness.log_level()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if args.command == "train":
        try:
            base, _ = parse_config(args.config)
        except (ConfigError, OSError) as e:
            print(f"config error: {e}", file=sys.stderr)
            return 1
        record = harness.execute_run(base, args.seed)
        if record.error:
            print(f"run failed: {record.error}", file=sys.stderr)
            return 2
        if args.out:
            harness.write_runs([record], args.out)
        status = "converged" if record.converged else "did not converge"
        print(f"{record.variant} seed={record.seed}: {status}; "
              f"best score {record.best_score}; "
              f"rewards to converge {record.rewards_to_converge}")
        return 0

    if args.command == "sweep":
        try:
            _, variants = parse_config(args.config)
            seeds = [int(s) for s in args.seeds.split(",") if s != ""]
            if not seeds:
                raise ConfigError("empty seed list")
        except (ConfigError, OSError, ValueError) as e:
            print(f"config error: {e}", file=sys.stderr)
            return 1
        records = harness.run_sweep(variants, seeds, jobs=args.jobs, out_dir=args.out)
        harness.write_report(records, args.out)
        if any(r.error for r in records):
            return 2
        return 0

    # report
    try:
        records = harness.load_runs(args.in_dir)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    harness.write_report(records, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
