"""Command-line entry point.

Exit codes: 0 on success, 1 on config/validation problems, 2 on runtime
failures during sampling or reporting.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import load_config, run_experiment, validate_config
from .errors import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guidedmh",
        description="Benchmark harness for Haar-mixture Metropolis kernels "
                    "and their guided variants.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to a YAML experiment config")
    run_p.add_argument("--out", help="output directory (overrides experiment.output)")
    run_p.add_argument("--seed", type=int, help="override experiment.seed")
    run_p.add_argument("--threads", type=int, help="override run.threads")
    run_p.add_argument("--kernel", action="append", dest="kernels", metavar="NAME",
                       help="run only this kernel (repeatable)")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress output")

    val_p = sub.add_parser("validate", help="validate a config and exit")
    val_p.add_argument("config", help="path to a YAML experiment config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = validate_config(load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        n_k = len(config.kernels)
        print(f"config OK: experiment '{config.name}', target "
              f"'{config.target['name']}', {n_k} kernel(s), "
              f"{config.run['replications']} replication(s)")
        return 0

    try:
        result = run_experiment(config, out_dir=args.out, seed=args.seed,
                                threads=args.threads, kernel_filter=args.kernels,
                                quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # sampling/reporting failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        for label, path in result["aggregates"].items():
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
