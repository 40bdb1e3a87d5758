"""``score-patch``: quality heatmap of an image's candidate clusters"""

import argparse
import json

from remnet.commands.common import load_run_config, prepare_out_dir
from remnet.services.cluster_service import cluster_service
from remnet.services.metrics_service import metrics_service
from remnet.utils.image_processing import ImageProcessor


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("score-patch", parents=[parent], help="score every candidate window of an image")
    parser.add_argument("--image", required=True, help="8-bit RGB image")
    parser.add_argument("--window", type=int, help="window size (default: data.cluster_size)")
    parser.add_argument("--stride", type=int, help="candidate stride (default: data.candidate_stride)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    window = args.window or config.data.cluster_size
    stride = args.stride or config.data.candidate_stride
    pixels = ImageProcessor.load_rgb(args.image)
    out_dir = prepare_out_dir(config)

    scores = cluster_service.score_map(pixels, window, stride, config.data.quality)
    metrics_service.write_heatmap(scores, out_dir / "heatmap.tsv", out_dir / "heatmap.png", stride=stride)
    best = divmod(int(scores.argmax()), scores.shape[1])
    print(json.dumps({
        "windows": int(scores.size),
        "max_quality": float(scores.max()),
        "min_quality": float(scores.min()),
        "best_origin": [best[0] * stride, best[1] * stride],
    }))
    return 0
