"""Command line entry point: ``idsbandit {simulate,oracle-check,bound-check}``.

Exit codes: 0 success, 2 config error, 3 check failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, load_config
from .gts import ExpertFileError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK_FAILED = 3
EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idsbandit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run the configured algorithms and write per-run CSVs and summary.json"),
        ("oracle-check", "compare quadrature IDS quantities with Monte Carlo estimates"),
        ("bound-check", "compare IDS regret with its information-theoretic bound"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        p.add_argument("--output", type=Path, default=None, help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for seeds")
    return parser


def _print_lines(lines) -> None:
    for line in lines:
        print(line.render())


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        out = cfg.resolve_output_dir(args.output)
        if args.command == "simulate":
            harness.simulate(cfg, out, jobs=args.jobs)
            return EXIT_OK
        if args.command == "oracle-check":
            report = harness.oracle_check(cfg)
            _print_lines(report["lines"])
            harness.write_report(report, out / "oracle_report.json")
        else:
            report = harness.bound_check(cfg, jobs=args.jobs)
            for row in report["checkpoints"]:
                print(
                    f"t={row['t']:>6d}  mean regret {row['mean_regret']:9.3f}  "
                    f"bound {row['bound']:9.3f}  psi-bound {row['psi_bound']:9.3f}"
                )
            _print_lines(report["lines"])
            harness.write_report(report, out / "bound_report.json")
        return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED
    except (ConfigError, ExpertFileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # e.g. experts that do not cover the environment
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
