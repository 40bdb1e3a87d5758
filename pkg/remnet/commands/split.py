"""``split``: device- and scene-disjoint train/val/test manifests"""

import argparse
import json

from remnet.commands.common import load_run_config, prepare_out_dir, require_manifest
from remnet.services.manifest_service import manifest_service
from remnet.services.split_service import split_service


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("split", parents=[parent], help="split a manifest by device and scene")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    records = manifest_service.read(require_manifest(config))
    out_dir = prepare_out_dir(config)

    split = split_service.split_by_device_scene(
        records,
        val_ratio=config.data.val_ratio,
        test_scene_ratio=config.data.test_scene_ratio,
        seed=config.seed,
    )
    for name in ("train", "val", "test"):
        manifest_service.write(getattr(split, name), out_dir / f"{name}.tsv")

    report = {
        "train": len(split.train),
        "val": len(split.val),
        "test": len(split.test),
        "discarded": split.discarded,
        "violations": split.violations,
    }
    (out_dir / "split_report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps(report))
    return 0
