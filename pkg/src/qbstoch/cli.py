"""Command line: ``qbstoch run <suite> --config <path> --out <dir> [--seed N] [--quick]``."""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from .errors import ValidationError
from .report import PASS
from .suites import SUITES, ConfigError, run_suite

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbstoch", description="Run numerical check suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a suite and write its report")
    run.add_argument("suite", choices=SUITES + ("all",))
    run.add_argument("--config", default=None, help="TOML file overriding the packaged defaults")
    run.add_argument("--out", required=True, help="directory for reports and plot tables")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.add_argument("--quick", action="store_true", help="counts / 10 and tolerances x 2")
    run.add_argument("--workers", type=int, default=None,
                     help="thread count (default: QBSTOCH_WORKERS or 1)")
    sub.add_parser("default-config", help="print the packaged default configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(resources.files("qbstoch").joinpath("data/default.toml").read_text())
        return EXIT_OK
    try:
        report = run_suite(args.suite, args.config, args.out, seed=args.seed, quick=args.quick,
                           workers=args.workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.summary())
    return EXIT_OK if all(r.verdict == PASS for r in report.records) else EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
