"""``experiment``: multi-seed desk-scale reproduction and cascade-benefit checks"""

import argparse
import logging
from typing import List

import pandas as pd

from remnet.commands.common import load_run_config, prepare_out_dir, require_manifest
from remnet.services.experiment_service import DESK_ACCURACY_THRESHOLD, experiment_service
from remnet.services.manifest_service import manifest_service
from remnet.utils.exceptions import ConfigError, ConstraintError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("desk", "cascade")


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise ConfigError("--seeds needs at least one seed")
    return seeds


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("experiment", parents=[parent], help="multi-seed acceptance experiment")
    parser.add_argument("name", choices=EXPERIMENTS)
    parser.add_argument("--seeds", default="0,1,2", help="comma-separated training seeds")
    parser.add_argument("--threshold", type=float, default=DESK_ACCURACY_THRESHOLD,
                        help="desk: held-out-device accuracy (%%) a seed must reach")
    parser.add_argument("--required", type=int, default=2, help="seeds that must meet the criterion")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = prepare_out_dir(config)
    seeds = parse_seeds(args.seeds)
    records = manifest_service.read(require_manifest(config))

    if args.name == "desk":
        report = experiment_service.desk_reproduction(
            config, records, seeds, out_dir, threshold=args.threshold, required=args.required
        )
    else:
        report = experiment_service.cascade_benefit(config, records, seeds, out_dir, required=args.required)

    (out_dir / "experiment.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    frame = pd.DataFrame([o.model_dump() for o in report.outcomes])
    frame.to_csv(out_dir / "experiment.tsv", sep="\t", index=False, float_format="%.6g")
    print(frame.to_string(index=False))
    for check, ok in report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {check}")

    if not report.passed:
        raise ConstraintError(
            f"experiment {report.name} failed",
            {"checks": report.checks, "seeds_passed": report.seeds_passed},
        )
    logger.info(f"Experiment {report.name} passed on {report.seeds_passed} of {len(seeds)} seeds")
    return 0
