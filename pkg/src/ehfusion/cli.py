"""Command line entry point.

    ehfusion run CONFIG [--out DIR] [--workers K]
    ehfusion preset NAME [--out DIR] [--seed S] [--scale desk|full] [--workers K]
    ehfusion validate CONFIG

Exit codes: 0 success, 1 usage error, 2 invariant violation, 3 IO error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, emit_config, parse_config
from .errors import InvalidArgument, InvariantViolation
from .presets import PRESETS, get_preset, run_preset, summary_csv, summary_row, traces_csv
from .simulation import run_monte_carlo

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehfusion", description="Energy-harvesting sensor network estimation simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--workers", type=int, default=1)

    pre = sub.add_parser("preset", help="run a named figure sweep")
    pre.add_argument("name", help="one of: " + ", ".join(PRESETS))
    pre.add_argument("--out", default=None, help="output directory (default: out/NAME)")
    pre.add_argument("--seed", type=int, default=None)
    pre.add_argument("--scale", choices=("desk", "full"), default="desk")
    pre.add_argument("--workers", type=int, default=1)

    val = sub.add_parser("validate", help="parse a config file and print the resolved values")
    val.add_argument("config")
    return p


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    result = run_monte_carlo(cfg, workers=args.workers)
    stem = os.path.splitext(os.path.basename(args.config))[0]
    with open(os.path.join(args.out, stem + ".csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(traces_csv(result.traces))
    with open(os.path.join(args.out, stem + "_summary.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_csv([summary_row(0.0, result)]))
    m, s = result.mean, result.std
    print(f"bmse={m['bmse']:.6g}±{s['bmse']:.3g} err={m['err']:.6g} active={m['active']:.3f} "
          f"energy_j={m['energy_j']:.6g} battery_j={m['battery_j']:.6g}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    preset = get_preset(args.name)
    out = args.out if args.out is not None else os.path.join("out", preset.name)
    run_preset(preset, out, scale=args.scale, seed=args.seed, workers=args.workers)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sys.stdout.write(emit_config(parse_config(args.config)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "preset": _cmd_preset, "validate": _cmd_validate}[args.verb]
    try:
        return handler(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
