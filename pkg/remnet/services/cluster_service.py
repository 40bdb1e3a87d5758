"""Quality-scored cluster extraction and patch cropping"""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from remnet.models.base import ClusterOrder
from remnet.models.dataset import ClusterRecord, ClusterSelection, ImageRecord, QualityConstants
from remnet.utils.exceptions import ConstraintError, ShapeError
from remnet.utils.image_processing import ImageProcessor

logger = logging.getLogger(__name__)

CLUSTER_SIZE = 256
PATCH_SIZE = 64


class ClusterService:
    """Service for scoring, ranking and cropping image regions"""

    def __init__(self, constants: Optional[QualityConstants] = None):
        self.constants = constants or QualityConstants()

    # -- scoring -----------------------------------------------------------
    def quality_score(self, pixels: np.ndarray, constants: Optional[QualityConstants] = None) -> float:
        """Mean over channels of alpha*beta*(mu - mu^2) + (1 - alpha)*(1 - exp(gamma*sigma)).

        ``pixels`` must be normalized to [0, 1]; sigma is the population
        standard deviation.
        """
        c = constants or self.constants
        values = np.asarray(pixels, dtype=np.float64)
        if values.ndim != 3:
            raise ShapeError(f"quality_score expects (H, W, C) pixels, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ConstraintError(
                "quality_score needs pixel values normalized to [0, 1]",
                {"min": float(np.nanmin(values)), "max": float(np.nanmax(values))},
            )
        mu = values.mean(axis=(0, 1))
        sigma = values.std(axis=(0, 1))
        per_channel = c.alpha * c.beta * (mu - mu * mu) + (1.0 - c.alpha) * (1.0 - np.exp(c.gamma * sigma))
        return float(per_channel.mean())

    def score_uint8(self, pixels: np.ndarray, constants: Optional[QualityConstants] = None) -> float:
        return self.quality_score(pixels.astype(np.float64) / 255.0, constants)

    def candidate_origins(self, height: int, width: int, size: int = CLUSTER_SIZE, stride: int = 64) -> List[Tuple[int, int]]:
        if height < size or width < size:
            raise ConstraintError(
                f"image {width}x{height} is smaller than the {size}x{size} cluster size",
                {"width": width, "height": height, "cluster_size": size},
            )
        if stride < 1:
            raise ConstraintError(f"candidate stride must be >= 1, got {stride}")
        rows = range(0, height - size + 1, stride)
        cols = range(0, width - size + 1, stride)
        return [(r, c) for r in rows for c in cols]

    def score_map(self, pixels: np.ndarray, size: int = CLUSTER_SIZE, stride: int = 64,
                  constants: Optional[QualityConstants] = None) -> np.ndarray:
        """Q of every candidate window laid out on the stride grid"""
        height, width = pixels.shape[:2]
        origins = self.candidate_origins(height, width, size, stride)
        n_rows = len(range(0, height - size + 1, stride))
        n_cols = len(range(0, width - size + 1, stride))
        scores = np.array([
            self.score_uint8(pixels[r:r + size, c:c + size], constants) for r, c in origins
        ])
        return scores.reshape(n_rows, n_cols)

    # -- extraction ----------------------------------------------------------
    def extract_clusters(
        self,
        pixels: np.ndarray,
        source: ImageRecord,
        count: int = 20,
        stride: int = 64,
        order: ClusterOrder = ClusterOrder.TOP,
        size: int = CLUSTER_SIZE,
        constants: Optional[QualityConstants] = None,
    ) -> ClusterSelection:
        """Rank every stride-grid window by Q and keep ``count`` of them.

        ``top`` keeps the highest-Q windows, ``bottom`` the lowest; ties go to
        the smaller (row, col). Fewer candidates than ``count`` returns all of
        them; the result carries the shortfall.
        """
        height, width = pixels.shape[:2]
        origins = self.candidate_origins(height, width, size, stride)
        scored = [
            (self.score_uint8(pixels[r:r + size, c:c + size], constants), r, c) for r, c in origins
        ]
        if order == ClusterOrder.TOP:
            scored.sort(key=lambda t: (-t[0], t[1], t[2]))
        else:
            scored.sort(key=lambda t: (t[0], t[1], t[2]))

        if len(scored) < count:
            logger.warning(
                f"{source.path}: only {len(scored)} candidate clusters, {count} requested"
            )
        clusters = (
            ClusterRecord(
                source=source,
                origin=(r, c),
                size=size,
                quality=q,
                pixels=np.ascontiguousarray(pixels[r:r + size, c:c + size]),
            )
            for q, r, c in scored[:count]
        )
        return ClusterSelection(clusters, requested=count)

    def extract_top_clusters(self, pixels: np.ndarray, source: ImageRecord, count: int = 20, stride: int = 64) -> ClusterSelection:
        return self.extract_clusters(pixels, source, count, stride, ClusterOrder.TOP)

    # -- patches -------------------------------------------------------------
    @staticmethod
    def random_patch_offset(rng: np.random.Generator, size: int = CLUSTER_SIZE, patch: int = PATCH_SIZE) -> Tuple[int, int]:
        """Uniform top-left in [0, size - patch]^2"""
        r, c = rng.integers(0, size - patch + 1, size=2)
        return int(r), int(c)

    def random_patch_crop(self, cluster: np.ndarray, rng: np.random.Generator, patch: int = PATCH_SIZE) -> np.ndarray:
        size = cluster.shape[0]
        r, c = self.random_patch_offset(rng, size, patch)
        return cluster[r:r + patch, c:c + patch]

    @staticmethod
    def center_crop(cluster: np.ndarray, patch: int = PATCH_SIZE) -> np.ndarray:
        r = (cluster.shape[0] - patch) // 2
        c = (cluster.shape[1] - patch) // 2
        return cluster[r:r + patch, c:c + patch]

    @staticmethod
    def non_overlapping_patches(cluster: np.ndarray, patch: int = PATCH_SIZE) -> np.ndarray:
        """Row-major tiling into (n*n, patch, patch, C)"""
        size = cluster.shape[0]
        if cluster.shape[1] != size or size % patch:
            raise ShapeError(f"cluster of shape {cluster.shape} cannot be tiled by {patch}x{patch} patches")
        n = size // patch
        channels = cluster.shape[2]
        tiles = cluster.reshape(n, patch, n, patch, channels).transpose(0, 2, 1, 3, 4)
        return tiles.reshape(n * n, patch, patch, channels)

    # -- cached extraction -----------------------------------------------------
    def clusters_for_record(
        self,
        record: ImageRecord,
        count: int = 20,
        stride: int = 64,
        order: ClusterOrder = ClusterOrder.TOP,
        size: int = CLUSTER_SIZE,
        cache_dir: Optional[Union[str, Path]] = None,
        pixels: Optional[np.ndarray] = None,
        constants: Optional[QualityConstants] = None,
    ) -> ClusterSelection:
        """Load the image (unless ``pixels`` is given) and extract clusters, via the cache if set"""
        if pixels is None:
            pixels = ImageProcessor.load_rgb(record.path)
        if cache_dir is None:
            return self.extract_clusters(pixels, record, count, stride, order, size, constants)

        key = self.cache_key(pixels, count, stride, order, size, constants)
        cache_path = Path(cache_dir) / f"{key}.npz"
        if cache_path.is_file():
            with np.load(cache_path) as cached:
                return ClusterSelection(
                    (
                        ClusterRecord(source=record, origin=(int(o[0]), int(o[1])), size=size,
                                      quality=float(q), pixels=p)
                        for o, q, p in zip(cached["origins"], cached["qualities"], cached["pixels"])
                    ),
                    requested=count,
                )

        clusters = self.extract_clusters(pixels, record, count, stride, order, size, constants)
        try:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = cache_path.with_suffix(".tmp.npz")
            np.savez(
                tmp,
                origins=np.array([c.origin for c in clusters], dtype=np.int64).reshape(-1, 2),
                qualities=np.array([c.quality for c in clusters], dtype=np.float64),
                pixels=np.stack([c.pixels for c in clusters]) if clusters else np.zeros((0, size, size, 3), np.uint8),
            )
            tmp.replace(cache_path)
        except OSError as e:
            logger.warning(f"Could not write cluster cache {cache_path}: {e}")
        return clusters

    def cache_key(self, pixels: np.ndarray, count: int, stride: int, order: ClusterOrder, size: int,
                  constants: Optional[QualityConstants] = None) -> str:
        """SHA-256 over pixel bytes plus every parameter that changes the result"""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(pixels).tobytes())
        digest.update(str(pixels.shape).encode())
        params = {"count": count, "stride": stride, "order": ClusterOrder(order).value, "size": size,
                  "constants": (constants or self.constants).model_dump()}
        digest.update(json.dumps(params, sort_keys=True).encode())
        return digest.hexdigest()


# Global instance
cluster_service = ClusterService()
