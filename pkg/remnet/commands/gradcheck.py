"""``gradcheck``: finite-difference check of every differentiable op"""

import argparse
import logging

import pandas as pd

from remnet.autodiff.gradcheck import DEFAULT_TOLERANCE, run_gradcheck_suite
from remnet.commands.common import load_run_config, prepare_out_dir
from remnet.utils.exceptions import GradcheckFailure

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("gradcheck", parents=[parent], help="op-by-op gradient check report")
    parser.add_argument("--instances", type=int, default=5, help="random instances per op")
    parser.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = prepare_out_dir(config)
    seeds = range(config.seed, config.seed + args.instances)
    report = run_gradcheck_suite(seeds, tolerance=args.tolerance)

    frame = pd.DataFrame(report.rows(), columns=["op", "seed", "max_relative_error", "passed"])
    frame.to_csv(out_dir / "gradcheck.tsv", sep="\t", index=False, float_format="%.3e")
    summary = frame.groupby("op", sort=False).agg(worst=("max_relative_error", "max"), passed=("passed", "all"))
    print(summary.to_string())

    if not report.passed:
        failed = sorted({r.name for r in report.failures})
        raise GradcheckFailure(
            f"{len(report.failures)} of {len(report.results)} checks exceeded tolerance {args.tolerance:g}",
            {"ops": failed},
        )
    logger.info(f"All {len(report.results)} gradient checks passed")
    return 0
