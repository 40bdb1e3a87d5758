"""``augment``: expand a manifest with manipulated copies"""

import argparse
import json
from typing import List, Optional

from remnet.commands.common import load_run_config, prepare_out_dir, require_manifest
from remnet.models.dataset import AugmentationSpec
from remnet.services.augmentation_service import augmentation_service
from remnet.services.manifest_service import manifest_service
from remnet.utils.exceptions import ConfigError


def parse_specs(text: Optional[str]) -> Optional[List[AugmentationSpec]]:
    """``"jpeg:70,gamma:0.8"`` -> specs; None keeps the training set"""
    if not text:
        return None
    specs = []
    for item in text.split(","):
        kind, _, factor = item.strip().partition(":")
        try:
            specs.append(AugmentationSpec(kind=kind, factor=float(factor or 1.0)))
        except ValueError as e:
            raise ConfigError(f"Invalid augmentation {item!r}: {e}", {"spec": item})
    return specs


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("augment", parents=[parent], help="write augmented copies of every image")
    parser.add_argument("--specs", help="comma-separated kind:factor list (default: the 9 training manipulations)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    specs = parse_specs(args.specs)
    records = manifest_service.read(require_manifest(config))
    out_dir = prepare_out_dir(config)

    augmented = augmentation_service.augment_manifest(records, out_dir, specs)
    path = manifest_service.write(augmented, out_dir / "augmented.tsv")
    print(json.dumps({"images": len(records), "records": len(augmented), "manifest": str(path)}))
    return 0
