"""Command-line entry point: parse a config, run the sweep, emit the bundle."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .output import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppstream",
        description=(
            "Time-slotted small-cell streaming simulator with backlog-aware "
            "quality adaptation and max-weight scheduling."
        ),
    )
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--slots", type=int, default=None, help="override slot horizon")
    parser.add_argument(
        "--v", default=None, help="override V sweep, comma-separated (e.g. 2e12,4e12)"
    )
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument(
        "--trace", choices=("on", "off"), default=None, help="emit per-slot edge trace"
    )
    parser.add_argument(
        "--plots", choices=("on", "off"), default=None, help="render figures"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "slots": args.slots,
        "v": args.v,
        "out": args.out,
        "trace": args.trace,
        "plots": args.plots,
    }
    try:
        spec = parse_config(args.config, overrides)
    except ConfigError as exc:
        for error in exc.errors:
            print(f"config error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        bundle = run_experiment(spec)
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for outputs in bundle.runs:
        print(f"V={outputs.v:.3g}: {outputs.directory}")
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
