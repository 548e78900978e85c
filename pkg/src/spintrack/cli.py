"""Command-line scenario runner.

Subcommands mirror the shipped experiments; ``validate`` checks a config file
without running anything.  Exit codes: 0 pass, 1 acceptance fail, 2 config
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ScenarioConfig, load_config, validate_config
from .noise import ConfigurationError
from .scenarios import SCENARIOS, run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintrack",
        description="Driven spin-qubit simulations: noise tracking, coherence, benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(SCENARIOS) + ["validate"]:
        p = sub.add_parser(name, help=f"run the {name} scenario" if name != "validate" else "validate a config file")
        p.add_argument("--config", metavar="PATH", help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, metavar="N")
        p.add_argument("--out", default=None, metavar="DIR")
        p.add_argument("--shots", type=int, default=None, metavar="N", help="override shot count")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        if not args.config:
            print("validate requires --config PATH", file=sys.stderr)
            return 2
        errors = validate_config(args.config)
        if errors:
            for e in errors:
                print(f"config error: {e}", file=sys.stderr)
            return 2
        if not args.quiet:
            print("ok")
        return 0

    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.name and cfg.name != args.command:
                print(
                    f"config error: scenario.name {cfg.name!r} does not match subcommand {args.command!r}",
                    file=sys.stderr,
                )
                return 2
            cfg = dataclasses.replace(cfg, name=args.command)
        else:
            cfg = ScenarioConfig(name=args.command)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if args.quiet:
        cfg = dataclasses.replace(cfg, quiet=True)
    if args.shots is not None:
        options = dict(cfg.options)
        options["shots"] = str(args.shots)
        cfg = dataclasses.replace(cfg, options=options)

    try:
        report = run_scenario(cfg)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 3
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    if not cfg.quiet:
        print(f"{'PASS' if report.passed else 'FAIL'}: {report.name} (summary in {cfg.out_dir})")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
