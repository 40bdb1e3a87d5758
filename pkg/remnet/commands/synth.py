"""``synth``: generate a synthetic multi-camera dataset"""

import argparse
import json
import logging

from remnet.commands.common import load_run_config, prepare_out_dir
from remnet.services.manifest_service import manifest_service
from remnet.services.synth_service import synth_service

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("synth", parents=[parent], help="generate a synthetic dataset")
    parser.add_argument("--skip-oracle", action="store_true", help="do not run the fingerprint oracle")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = prepare_out_dir(config)
    descriptor = synth_service.generate_dataset(config.synth, out_dir, master_seed=config.seed)

    summary = {"images": descriptor.n_images, "manifest": str(out_dir / descriptor.manifest)}
    if not args.skip_oracle:
        records = manifest_service.read(out_dir / descriptor.manifest)
        summary["oracle_patch_accuracy"] = synth_service.fingerprint_oracle_accuracy(records, seed=config.seed)
    (out_dir / "synth_summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    print(json.dumps(summary))
    return 0
