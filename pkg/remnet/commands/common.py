"""Flags and config handling shared by every command"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from remnet.config import settings
from remnet.models.dataset import ImageRecord
from remnet.models.run import RunConfig
from remnet.services.manifest_service import manifest_service
from remnet.services.split_service import split_service
from remnet.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


def common_parser() -> argparse.ArgumentParser:
    """Parent parser carrying the flags every command accepts"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="output directory; every file the command writes goes here")
    parser.add_argument("--n-votes", type=int, dest="n_votes", help="clusters voting per image (default 20)")
    parser.add_argument("--manifest", help="dataset manifest (TSV)")
    parser.add_argument("--checkpoint", help="model checkpoint")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with command-line overrides applied"""
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out:
        updates["out_dir"] = args.out
    if updates:
        config = config.model_copy(update=updates)
    if args.n_votes is not None:
        if args.n_votes <= 0:
            raise ConfigError(f"--n-votes must be positive, got {args.n_votes}")
        config.evaluation = config.evaluation.model_copy(update={"n_votes": args.n_votes})
    if args.manifest:
        config.data = config.data.model_copy(update={"manifest": args.manifest})
    config.train = config.train.model_copy(update={"seed": config.seed})
    if not config.out_dir:
        config.out_dir = settings.default_out_dir
    return config


def prepare_out_dir(config: RunConfig) -> Path:
    """Create the output directory and store the effective config in it"""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.dump(out_dir / settings.run_config_name)
    return out_dir


def require_manifest(config: RunConfig) -> str:
    if not config.data.manifest:
        raise ConfigError("no manifest given (use --manifest or data.manifest in the config)")
    return config.data.manifest


def split_records(config: RunConfig, out_dir: Optional[Path] = None) -> Tuple[List[ImageRecord], List[ImageRecord], List[ImageRecord]]:
    """Train/val/test records from explicit split manifests or by splitting ``data.manifest``"""
    data = config.data
    if data.train_manifest and data.val_manifest:
        train = manifest_service.read(data.train_manifest)
        val = manifest_service.read(data.val_manifest)
        test = manifest_service.read(data.test_manifest) if data.test_manifest else []
        return train, val, test

    records = manifest_service.read(require_manifest(config))
    split = split_service.split_by_device_scene(
        records, val_ratio=data.val_ratio, test_scene_ratio=data.test_scene_ratio, seed=config.seed
    )
    if out_dir is not None:
        for name in ("train", "val", "test"):
            manifest_service.write(getattr(split, name), out_dir / f"{name}.tsv")
    return split.train, split.val, split.test
