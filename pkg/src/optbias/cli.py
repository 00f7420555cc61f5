"""Command-line entry point: ``optbias run`` and ``optbias verify``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .harness import ExperimentConfig, TooManySkipped, read_config_file, run_experiment
from .verify import verify_suite

RUN_FLAGS = ("p_list", "n", "q", "trials", "seed", "centering", "kappa_mode", "estimators", "out", "c0", "c1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optbias", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte-Carlo study and write CSV tables and SVG figures")
    run.add_argument("--config", help="key = value config file; flags override it")
    run.add_argument("--p-list", help="comma-separated ascending dimensions, e.g. 500,2000,8000")
    run.add_argument("--n", help="observations per panel")
    run.add_argument("--q", help="number of spikes")
    run.add_argument("--trials", help="Monte-Carlo trials")
    run.add_argument("--seed", help="64-bit seed for calibration and trial streams")
    run.add_argument("--centering", choices=("on", "off"))
    run.add_argument("--kappa-mode", choices=("plain", "mp"))
    run.add_argument("--estimators", help="comma-separated subset of pca,flat,sharp")
    run.add_argument("--out", help="output directory")
    run.add_argument("--c0", help="objective constant")
    run.add_argument("--c1", help="objective linear scale")
    run.add_argument("--workers", type=int, help="worker processes (default: $OPTBIAS_WORKERS or CPU count)")
    run.add_argument("--no-figures", action="store_true", help="skip the SVG figures")

    ver = sub.add_parser("verify", help="run oracle and invariant checks at small dimension")
    ver.add_argument("--seed", type=int, default=7)
    ver.add_argument("--inject-asymmetric-truth", action="store_true", help=argparse.SUPPRESS)
    return parser


def _run(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    for name in RUN_FLAGS:
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    config = ExperimentConfig.from_mapping(values)
    try:
        result = run_experiment(config, workers=args.workers, figures=not args.no_figures)
    except TooManySkipped as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, path in result.paths.items():
        print(f"{name}\t{path}")
    if result.skipped:
        print(f"skipped {len(result.skipped)} trial(s)", file=sys.stderr)
    return 0


def _verify(args) -> int:
    results = verify_suite(seed=args.seed, inject_asymmetric_truth=args.inject_asymmetric_truth)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}\t{r.name}\t{r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _verify(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
