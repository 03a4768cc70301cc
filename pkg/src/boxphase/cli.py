"""Command-line experiment driver.

    boxphase <kind> [--config PATH] [--set key=value ...] [--out DIR]
                    [--gauge vector|coulomb|both] [--no-figures]

Kinds: sweep | loop | bound-check | convergence | phase-map | recurrence.
Exit codes: 0 all checks passed, 1 invariant failure, 2 configuration error,
3 numeric failure.
"""

import argparse
import sys

from .config import KINDS, parse_config
from .errors import ConfigError, NumericFailureError
from .experiments import run_experiment, write_bundle

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="boxphase",
        description="Swept-source partial-phase experiments in a 2D box")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="|".join(KINDS))
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", default=None, help="flat key = value configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="K=V", help="override a configuration key (repeatable)")
        p.add_argument("--out", default=None, help="output directory (default: config value)")
        p.add_argument("--gauge", default=None, choices=("vector", "coulomb", "both"))
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    overrides.append(f"kind={args.kind}")
    if args.gauge:
        overrides.append(f"gauge={args.gauge}")
    if args.out:
        overrides.append(f"out={args.out}")
    if args.no_figures:
        overrides.append("figures=false")
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        bundle = run_experiment(cfg)
    except NumericFailureError as exc:
        print(f"numeric failure: {exc} (achieved={exc.achieved}, requested={exc.requested})",
              file=sys.stderr)
        return EXIT_NUMERIC

    write_bundle(bundle, cfg.out)
    for check in bundle.checks:
        print(check.line())
    if bundle.all_passed:
        print(f"RESULT: ALL CHECKS PASSED ({len(bundle.checks)} checks) -> {cfg.out}")
        return EXIT_OK
    print(f"RESULT: CHECK FAILURES -> {cfg.out}", file=sys.stderr)
    return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
