"""``train``: split, augment, extract clusters and train a cascade"""

import argparse
import json
import logging

from remnet.commands.common import load_run_config, prepare_out_dir, split_records
from remnet.networks.cascade import build_model, parameter_count
from remnet.services.augmentation_service import augmentation_service
from remnet.services.manifest_service import manifest_service
from remnet.services.training_service import training_service
from remnet.utils.exceptions import ConstraintError

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("train", parents=[parent], help="train a model end to end")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = prepare_out_dir(config)

    train_records, val_records, _ = split_records(config, out_dir)
    if not train_records or not val_records:
        raise ConstraintError(
            "train and validation splits must both be non-empty",
            {"train": len(train_records), "val": len(val_records)},
        )
    if config.data.augment:
        train_records = augmentation_service.augment_manifest(train_records, out_dir / "augmented" / "train")
        val_records = augmentation_service.augment_manifest(val_records, out_dir / "augmented" / "val")
        manifest_service.write(train_records, out_dir / "train_augmented.tsv")
        manifest_service.write(val_records, out_dir / "val_augmented.tsv")

    train_clusters = training_service.prepare_clusters(train_records, config.data)
    val_clusters = training_service.prepare_clusters(val_records, config.data)

    model = build_model(config.architecture, config.seed)
    logger.info(f"Model has {parameter_count(model)} trainable parameters")
    result = training_service.train(model, train_clusters, val_clusters, config.train, out_dir, config.architecture)

    (out_dir / "train_result.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    print(json.dumps({
        "checkpoint": result.checkpoint_path,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "epochs": len(result.history),
        "stopped_by": result.stopped_by,
    }))
    return 0
