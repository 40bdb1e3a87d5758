"""End-to-end training with a reduce-on-plateau schedule"""

import json
import logging
import math
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from remnet.autodiff import functional as F
from remnet.autodiff.checkpoint import save_checkpoint
from remnet.autodiff.optim import Adam, PlateauScheduler
from remnet.autodiff.tensor import Tensor, no_grad
from remnet.config import settings
from remnet.models.architecture import ArchitectureDescriptor
from remnet.models.base import ClusterOrder
from remnet.models.dataset import ClusterRecord, ImageRecord
from remnet.models.run import DataConfig
from remnet.models.training import CheckpointMeta, HistoryRecord, TrainConfig, TrainResult
from remnet.networks.cascade import CascadeModel
from remnet.services.cluster_service import cluster_service
from remnet.utils.exceptions import (
    ConstraintError,
    DatasetWriteError,
    NonFiniteError,
    TrainingDivergedError,
)
from remnet.utils.image_processing import ImageProcessor

logger = logging.getLogger(__name__)


@dataclass
class PatchBatch:
    x: np.ndarray  # (B, P, P, 3) float32 in [0, 1]
    y: np.ndarray  # (B,) int64


def batch_bounds(n: int, batch_size: int) -> List[Tuple[int, int]]:
    """Batch slices over ``n`` items; a trailing single item joins the previous batch.

    Training-mode batch norm needs at least two samples per batch.
    """
    bounds = [(start, min(start + batch_size, n)) for start in range(0, n, batch_size)]
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        last = bounds.pop()
        bounds[-1] = (bounds[-1][0], last[1])
    return bounds


class BatchProducer:
    """Background thread cropping one random patch per cluster, in epoch order.

    Batches reach the consumer through a bounded FIFO queue, so the order is
    the same as a sequential loop. Crop seeds derive from (seed, epoch,
    cluster index) and the shuffle from (seed, epoch).
    """

    _DONE = object()

    def __init__(self, clusters: Sequence[ClusterRecord], batch_size: int, seed: int, epoch: int,
                 patch: int, prefetch: int = 2):
        self.clusters = clusters
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = epoch
        self.patch = patch
        self._queue: "queue.Queue" = queue.Queue(maxsize=prefetch)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name=f"batches-epoch{epoch}", daemon=True)

    def order(self) -> np.ndarray:
        return np.random.default_rng([self.seed, self.epoch]).permutation(len(self.clusters))

    def make_batch(self, indices: np.ndarray) -> PatchBatch:
        patches = []
        for idx in indices:
            rng = np.random.default_rng([self.seed, self.epoch, int(idx)])
            cluster = self.clusters[idx]
            patches.append(cluster_service.random_patch_crop(cluster.pixels, rng, self.patch))
        x = ImageProcessor.to_unit(np.stack(patches))
        y = np.array([self.clusters[i].label for i in indices], dtype=np.int64)
        return PatchBatch(x=x, y=y)

    def _put(self, item) -> bool:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _run(self) -> None:
        try:
            order = self.order()
            for start, stop in batch_bounds(len(order), self.batch_size):
                if not self._put(self.make_batch(order[start:stop])):
                    return
        except Exception as e:  # handed to the consumer
            self._put(e)
            return
        self._put(self._DONE)

    def __iter__(self) -> Iterator[PatchBatch]:
        self._thread.start()
        try:
            while True:
                item = self._queue.get()
                if item is self._DONE:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            self._stop.set()
            self._thread.join()


class TrainingService:
    """Service for preparing cluster sets and training cascade models"""

    def prepare_clusters(
        self,
        records: Sequence[ImageRecord],
        data: DataConfig,
        order: ClusterOrder = ClusterOrder.TOP,
        workers: Optional[int] = None,
    ) -> List[ClusterRecord]:
        """Extract ``clusters_per_image`` clusters from every image, in manifest order.

        Images smaller than one cluster are skipped with a warning.
        """
        workers = workers or settings.worker_count

        def extract(record: ImageRecord) -> List[ClusterRecord]:
            try:
                return cluster_service.clusters_for_record(
                    record,
                    count=data.clusters_per_image,
                    stride=data.candidate_stride,
                    order=order,
                    size=data.cluster_size,
                    cache_dir=data.cache_dir,
                    constants=data.quality,
                )
            except ConstraintError as e:
                logger.warning(f"Skipping {record.path}: {e.message}")
                return []

        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(extract, records))
        clusters = [c for group in groups for c in group]
        logger.info(f"Prepared {len(clusters)} clusters from {len(records)} images")
        return clusters

    # -- single steps ----------------------------------------------------------
    @staticmethod
    def _loss(model: CascadeModel, x: np.ndarray, y: np.ndarray) -> Tensor:
        logits = model(Tensor(x))
        loss, _ = F.softmax_cross_entropy(logits, y)
        return loss

    def fit_batch(self, model: CascadeModel, x: np.ndarray, y: np.ndarray, steps: int, lr: float = 1e-3) -> List[float]:
        """Repeated Adam steps on one fixed batch; returns the loss of every step"""
        model.train()
        optimizer = Adam(model.parameters(), lr=lr)
        losses = []
        for _ in range(steps):
            optimizer.zero_grad()
            loss = self._loss(model, x, y)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        return losses

    def validation_loss(self, model: CascadeModel, clusters: Sequence[ClusterRecord], batch_size: int) -> float:
        """Mean cross-entropy over one center crop per cluster, inference mode"""
        patch = model.input_shape[0]
        was_training = model.training
        model.eval()
        total = 0.0
        with no_grad():
            for start in range(0, len(clusters), batch_size):
                chunk = clusters[start:start + batch_size]
                x = ImageProcessor.to_unit(np.stack([cluster_service.center_crop(c.pixels, patch) for c in chunk]))
                y = np.array([c.label for c in chunk], dtype=np.int64)
                total += self._loss(model, x, y).item() * len(chunk)
        model.train(was_training)
        return total / len(clusters)

    # -- full training -------------------------------------------------------------
    def train(
        self,
        model: CascadeModel,
        train_clusters: Sequence[ClusterRecord],
        val_clusters: Sequence[ClusterRecord],
        config: TrainConfig,
        out_dir: Union[str, Path],
        architecture: Optional[ArchitectureDescriptor] = None,
    ) -> TrainResult:
        """Train until the learning rate drops below the floor or ``max_epochs`` is reached.

        Writes ``best.ckpt`` (lowest validation loss so far, strictly) and a
        per-epoch history TSV to ``out_dir``.
        """
        if len(train_clusters) < 2:
            raise ConstraintError(f"training needs at least 2 clusters, got {len(train_clusters)}")
        if not val_clusters:
            raise ConstraintError("validation set is empty")
        architecture = architecture or model.descriptor or ArchitectureDescriptor()

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_path = out_dir / settings.checkpoint_name
        history_path = out_dir / settings.history_name

        optimizer = Adam(
            model.parameters(), lr=config.lr_init,
            beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps,
        )
        scheduler = PlateauScheduler(
            config.lr_init, factor=config.lr_decay_factor, patience=config.plateau_patience,
            lr_floor=config.lr_floor, min_delta=config.min_delta,
        )
        patch = model.input_shape[0]
        history: List[HistoryRecord] = []
        best_val = math.inf
        best_epoch = 0
        stopped_by = "max_epochs"

        logger.info(
            f"Training on {len(train_clusters)} clusters ({len(val_clusters)} validation), "
            f"batch {config.batch_size}, lr {config.lr_init:g}, up to {config.max_epochs} epochs"
        )
        for epoch in range(1, config.max_epochs + 1):
            lr = scheduler.lr
            optimizer.lr = lr
            model.train()
            producer = BatchProducer(train_clusters, config.batch_size, config.seed, epoch, patch,
                                     config.prefetch_batches)
            total = 0.0
            for step, batch in enumerate(producer):
                optimizer.zero_grad()
                loss = self._loss(model, batch.x, batch.y)
                value = loss.item()
                if not math.isfinite(value):
                    self._abort(model, out_dir, epoch, step, lr, value, history, "non-finite training loss")
                loss.backward()
                try:
                    optimizer.step()
                except NonFiniteError as e:
                    self._abort(model, out_dir, epoch, step, lr, value, history, e.message)
                total += value * len(batch.y)
            train_loss = total / len(train_clusters)

            val_loss = self.validation_loss(model, val_clusters, config.batch_size)
            if not math.isfinite(val_loss):
                self._abort(model, out_dir, epoch, -1, lr, val_loss, history, "non-finite validation loss")
            history.append(HistoryRecord(epoch=epoch, lr=lr, train_loss=train_loss, val_loss=val_loss))
            self.write_history(history, history_path)

            improved = val_loss < best_val
            if improved:
                best_val, best_epoch = val_loss, epoch
                params, buffers = model.state_dict()
                meta = CheckpointMeta(epoch=epoch, val_loss=val_loss, seed=config.seed, architecture=architecture)
                save_checkpoint(checkpoint_path, params, buffers, meta.model_dump(mode="json"))
            logger.info(
                f"Epoch {epoch}: lr={lr:.3e} train_loss={train_loss:.5f} val_loss={val_loss:.5f}"
                + (" (best)" if improved else "")
            )

            scheduler.step(val_loss)
            if scheduler.should_stop:
                stopped_by = "lr_floor"
                logger.info(f"Learning rate {scheduler.lr:.3e} below floor {config.lr_floor:g}; stopping")
                break

        return TrainResult(
            checkpoint_path=str(checkpoint_path),
            best_epoch=best_epoch,
            best_val_loss=best_val,
            history=history,
            stopped_by=stopped_by,
        )

    @staticmethod
    def write_history(history: Sequence[HistoryRecord], path: Union[str, Path]) -> Path:
        path = Path(path)
        frame = pd.DataFrame([h.model_dump() for h in history], columns=["epoch", "lr", "train_loss", "val_loss"])
        try:
            frame.to_csv(path, sep="\t", index=False, float_format="%.8g")
        except OSError as e:
            raise DatasetWriteError(f"Failed to write history {path}: {e}", {"path": str(path)})
        return path

    def _abort(self, model: CascadeModel, out_dir: Path, epoch: int, step: int, lr: float,
               loss: float, history: Sequence[HistoryRecord], reason: str) -> None:
        """Dump diagnostic state to ``divergence.json`` and raise"""
        parameters = {}
        for name, p in model.named_parameters():
            grad = p.grad
            parameters[name] = {
                "max_abs": float(np.nanmax(np.abs(p.data))) if p.data.size else 0.0,
                "non_finite": int(np.size(p.data) - np.count_nonzero(np.isfinite(p.data))),
                "grad_non_finite": None if grad is None else int(grad.size - np.count_nonzero(np.isfinite(grad))),
            }
        state = {
            "reason": reason,
            "epoch": epoch,
            "step": step,
            "lr": lr,
            "loss": repr(loss),
            "history": [h.model_dump() for h in history],
            "parameters": parameters,
        }
        dump_path = out_dir / "divergence.json"
        try:
            dump_path.write_text(json.dumps(state, indent=2), encoding="utf-8")
        except OSError as e:
            logger.error(f"Could not write divergence dump {dump_path}: {e}")
        logger.error(f"Training diverged at epoch {epoch}, step {step}: {reason}")
        raise TrainingDivergedError(
            f"Training diverged at epoch {epoch}: {reason}",
            {"epoch": epoch, "step": step, "dump": str(dump_path)},
        )


# Global instance
training_service = TrainingService()
