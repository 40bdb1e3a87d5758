"""Cluster-level prediction and image-level majority voting"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from remnet.autodiff.checkpoint import load_checkpoint
from remnet.autodiff.tensor import Tensor, no_grad
from remnet.config import settings
from remnet.models.base import ClusterOrder
from remnet.models.dataset import AugmentationSpec, ClusterRecord, ClusterSelection, ImageRecord, QualityConstants
from remnet.models.training import CheckpointMeta, EvalMetrics, PredictionRecord
from remnet.networks.cascade import CascadeModel, build_model
from remnet.services.augmentation_service import augmentation_service
from remnet.services.cluster_service import cluster_service
from remnet.services.metrics_service import metrics_service
from remnet.utils.exceptions import ConstraintError, SchemaError
from remnet.utils.image_processing import ImageProcessor

logger = logging.getLogger(__name__)


class InferenceService:
    """Service turning cluster predictions into per-image labels"""

    def load_model(self, checkpoint_path: Union[str, Path]) -> Tuple[CascadeModel, CheckpointMeta]:
        """Rebuild the model recorded in a checkpoint header and load its weights (eval mode)"""
        data = load_checkpoint(checkpoint_path)
        try:
            meta = CheckpointMeta.model_validate(data.header)
        except ValueError as e:
            raise SchemaError(f"Checkpoint header of {checkpoint_path} is invalid: {e}", {"path": str(checkpoint_path)})
        model = build_model(meta.architecture, meta.seed)
        model.load_state_dict(data.parameters, data.buffers)
        model.eval()
        logger.info(f"Loaded checkpoint {checkpoint_path} (epoch {meta.epoch}, val_loss {meta.val_loss:.5f})")
        return model, meta

    # -- clusters ----------------------------------------------------------------
    def patch_probabilities(self, model: CascadeModel, patches: np.ndarray) -> np.ndarray:
        """(P, n_class) probabilities for uint8 patches, inference mode"""
        model.eval()
        with no_grad():
            return model.probabilities(Tensor(ImageProcessor.to_unit(patches)))

    def predict_cluster(self, model: CascadeModel, cluster: np.ndarray) -> Tuple[int, np.ndarray]:
        """Mean probability over the non-overlapping patches; argmax picks the lowest index on ties"""
        patches = cluster_service.non_overlapping_patches(cluster, model.input_shape[0])
        mean = self.patch_probabilities(model, patches).mean(axis=0)
        return int(np.argmax(mean)), mean

    def predict_clusters(self, model: CascadeModel, clusters: Sequence[ClusterRecord]) -> List[Tuple[int, np.ndarray]]:
        """``predict_cluster`` for many clusters with a single forward pass"""
        if not clusters:
            return []
        patch = model.input_shape[0]
        tiles = [cluster_service.non_overlapping_patches(c.pixels, patch) for c in clusters]
        per_cluster = tiles[0].shape[0]
        probs = self.patch_probabilities(model, np.concatenate(tiles))
        means = probs.reshape(len(clusters), per_cluster, -1).mean(axis=1)
        return [(int(np.argmax(m)), m) for m in means]

    # -- voting --------------------------------------------------------------------
    @staticmethod
    def vote(labels: Sequence[int], probabilities: Sequence[np.ndarray], n_class: int) -> Tuple[int, np.ndarray]:
        """Majority vote over cluster labels.

        Ties go to the tied class with the largest probability summed over all
        voting clusters, then to the lowest class index. Summation is exact
        (``math.fsum``), so the result does not depend on cluster order.
        """
        if not labels:
            raise ConstraintError("cannot vote over zero clusters")
        tally = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_class)
        tied = np.flatnonzero(tally == tally.max())
        if len(tied) == 1:
            return int(tied[0]), tally
        stacked = np.asarray(probabilities, dtype=np.float64)
        sums = {int(c): math.fsum(stacked[:, c].tolist()) for c in tied}
        best = max(sums.values())
        return min(c for c, s in sums.items() if s == best), tally

    def predict_image(
        self,
        model: CascadeModel,
        pixels: np.ndarray,
        record: Optional[ImageRecord] = None,
        n_votes: int = 20,
        stride: int = 64,
        order: ClusterOrder = ClusterOrder.TOP,
        cluster_size: int = 256,
        constants: Optional[QualityConstants] = None,
        manipulation: str = "none",
    ) -> PredictionRecord:
        record = record or ImageRecord(path="<memory>", model_label=0, device_id="", scene_id="")
        clusters = cluster_service.extract_clusters(pixels, record, n_votes, stride, order, cluster_size, constants)
        return self.record_from_clusters(model, clusters, record, manipulation)

    def record_from_clusters(self, model: CascadeModel, clusters: Sequence[ClusterRecord],
                             record: ImageRecord, manipulation: str = "none") -> PredictionRecord:
        if not clusters:
            raise ConstraintError(f"{record.path} yields no clusters", {"path": record.path})
        predictions = self.predict_clusters(model, clusters)
        labels = [label for label, _ in predictions]
        means = [mean for _, mean in predictions]
        final, tally = self.vote(labels, means, model.n_class)
        return PredictionRecord(
            path=record.path,
            true_label=record.model_label,
            cluster_labels=labels,
            cluster_probabilities=[m.astype(float).tolist() for m in means],
            vote_tally=tally.tolist(),
            final_label=final,
            manipulation=manipulation,
            cluster_shortfall=clusters.shortfall if isinstance(clusters, ClusterSelection) else 0,
        )

    # -- datasets --------------------------------------------------------------------
    def evaluate(
        self,
        model: CascadeModel,
        records: Sequence[ImageRecord],
        n_votes: int = 20,
        stride: int = 64,
        manipulation: Optional[AugmentationSpec] = None,
        order: ClusterOrder = ClusterOrder.TOP,
        constants: Optional[QualityConstants] = None,
        workers: Optional[int] = None,
        cluster_size: int = 256,
    ) -> Tuple[List[PredictionRecord], EvalMetrics]:
        """Predict every image (optionally manipulated first) and score the result"""
        if not records:
            raise ConstraintError("evaluation set is empty")
        tag = manipulation.tag if manipulation is not None else "none"
        workers = workers or settings.worker_count
        model.eval()

        def predict(record: ImageRecord) -> PredictionRecord:
            with no_grad():
                pixels = ImageProcessor.load_rgb(record.path)
                if manipulation is not None:
                    pixels = augmentation_service.augment(pixels, manipulation)
                return self.predict_image(model, pixels, record, n_votes, stride, order, cluster_size, constants,
                                          manipulation=tag)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(pool.map(predict, records))

        acc = metrics_service.accuracy(predictions)
        metrics = EvalMetrics(
            accuracy=acc,
            n_images=len(predictions),
            n_correct=sum(p.correct for p in predictions),
            n_votes=n_votes,
            images_with_shortfall=sum(1 for p in predictions if p.cluster_shortfall),
        )
        if metrics.images_with_shortfall:
            logger.warning(
                f"{metrics.images_with_shortfall} of {len(predictions)} images supplied fewer than {n_votes} clusters"
            )
        logger.info(f"Accuracy ({tag}, N={n_votes}): {acc:.2f}% over {len(predictions)} images")
        return predictions, metrics

    def voting_sweep(
        self,
        model: CascadeModel,
        records: Sequence[ImageRecord],
        n_list: Sequence[int] = (1, 5, 10, 20),
        stride: int = 64,
        order: ClusterOrder = ClusterOrder.BOTTOM,
        constants: Optional[QualityConstants] = None,
        workers: Optional[int] = None,
        cluster_size: int = 256,
    ) -> Dict[int, float]:
        """Accuracy per voting number N.

        Clusters are ranked once per image; voting on the first N of the
        ranking equals re-running ``predict_image`` with N votes.
        """
        if not records:
            raise ConstraintError("voting sweep needs at least one image")
        n_max = max(n_list)
        workers = workers or settings.worker_count
        model.eval()

        def rank(record: ImageRecord):
            with no_grad():
                pixels = ImageProcessor.load_rgb(record.path)
                clusters = cluster_service.extract_clusters(pixels, record, n_max, stride, order, cluster_size, constants)
                return record, clusters, self.predict_clusters(model, clusters)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranked = list(pool.map(rank, records))

        sweep = {}
        for n in sorted(n_list):
            predictions = []
            for record, clusters, cluster_predictions in ranked:
                chosen = cluster_predictions[:n]
                if not chosen:
                    raise ConstraintError(f"{record.path} yields no clusters", {"path": record.path})
                final, _ = self.vote([lbl for lbl, _ in chosen], [m for _, m in chosen], model.n_class)
                predictions.append(PredictionRecord(path=record.path, true_label=record.model_label, final_label=final))
            sweep[n] = metrics_service.accuracy(predictions)
            logger.info(f"Voting sweep ({ClusterOrder(order).value} clusters) N={n}: {sweep[n]:.2f}%")
        return sweep


# Global instance
inference_service = InferenceService()
