"""``eval``: image-level accuracy, confusion matrix, voting sweep, manipulations"""

import argparse
import json
import logging
from pathlib import Path

from remnet.commands.common import load_run_config, prepare_out_dir, split_records
from remnet.config import settings
from remnet.models.dataset import AugmentationSpec
from remnet.services.inference_service import inference_service
from remnet.services.manifest_service import manifest_service
from remnet.services.metrics_service import metrics_service
from remnet.utils.exceptions import ConstraintError

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("eval", parents=[parent], help="evaluate a checkpoint on the test split")
    parser.add_argument("--no-sweep", action="store_true", help="skip the voting-number sweep")
    parser.add_argument("--all-images", action="store_true",
                        help="evaluate every manifest row instead of the test split")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = prepare_out_dir(config)
    checkpoint = args.checkpoint or str(out_dir / settings.checkpoint_name)
    model, _ = inference_service.load_model(checkpoint)

    data = config.data
    if args.all_images and data.manifest:
        records = manifest_service.read(data.manifest)
    elif data.test_manifest:
        records = manifest_service.read(data.test_manifest)
    else:
        _, _, records = split_records(config)
    if not records:
        raise ConstraintError("no test images to evaluate")

    evaluation = config.evaluation
    predictions, metrics = inference_service.evaluate(
        model, records, n_votes=evaluation.n_votes, stride=data.candidate_stride, constants=data.quality,
        cluster_size=data.cluster_size,
    )
    matrix = metrics_service.confusion_matrix(predictions, model.n_class)
    metrics_service.write_confusion(matrix, out_dir / "confusion.tsv", out_dir / "confusion.png")

    if evaluation.manipulations:
        specs = (
            [AugmentationSpec(kind="gamma", factor=g) for g in evaluation.manipulation_gammas]
            + [AugmentationSpec(kind="jpeg", factor=q) for q in evaluation.manipulation_jpeg_qualities]
            + [AugmentationSpec(kind="rescale", factor=s) for s in evaluation.manipulation_rescale_factors]
        )
        for spec in specs:
            manipulated, spec_metrics = inference_service.evaluate(
                model, records, n_votes=evaluation.n_votes, stride=data.candidate_stride,
                manipulation=spec, constants=data.quality, cluster_size=data.cluster_size,
            )
            predictions.extend(manipulated)
            metrics.manipulated_accuracy[spec.tag] = spec_metrics.accuracy
        metrics.weighted_score = metrics_service.weighted_score(
            metrics.accuracy, metrics_service.summarize(metrics.manipulated_accuracy)
        )

    metrics_service.write_predictions(predictions, out_dir / "predictions.jsonl")

    if not args.no_sweep:
        sweep = inference_service.voting_sweep(
            model, records, evaluation.sweep_votes, stride=data.candidate_stride,
            order=evaluation.sweep_order, constants=data.quality, cluster_size=data.cluster_size,
        )
        metrics_service.write_sweep(sweep, out_dir / "sweep.txt", out_dir / "sweep.png")

    Path(out_dir / "metrics.json").write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    print(metrics.model_dump_json())
    return 0
