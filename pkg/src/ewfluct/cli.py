"""Command line entry point.

    ewfluct <experiment> --config cfg.toml [--seed S] [--replicas R]
            [--out DIR] [--workers W] [--dry-run]

Exit codes: 0 all configured tolerances passed, 1 a tolerance failed,
2 usage or configuration error.
"""

import argparse
import sys

from .errors import ConfigError
from .harness import EXPERIMENTS, parse_config, run_experiment, serialize_config


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ewfluct",
        description="Desk-scale experiments for transport-diffusion fluctuations",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--replicas", type=int, default=None, help="override replica count")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--dry-run", action="store_true",
                       help="validate and print the resolved config, then exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    overrides = {"name": args.experiment}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        cfg = parse_config(text, overrides=overrides)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    if args.dry_run:
        print(serialize_config(cfg), end="")
        return 0
    report = run_experiment(cfg)
    for key in sorted(report.passes):
        status = "PASS" if report.passes[key] else "FAIL"
        print(f"[{status}] {cfg.name}: {key}")
    for key in sorted(report.metrics):
        print(f"  {key} = {report.metrics[key]}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
