"""Multi-seed acceptance experiments on a synthetic dataset.

``desk_reproduction`` trains the configured network once per seed and
checks held-out-device accuracy against a threshold. ``cascade_benefit``
trains the configured cascade and the same classifier without its
preprocessing blocks on each seed and compares validation loss at a fixed
epoch and final accuracy.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

from remnet.config import settings
from remnet.models.base import PreprocessingKind
from remnet.models.dataset import ImageRecord
from remnet.models.experiment import ExperimentReport, SeedOutcome
from remnet.models.run import RunConfig
from remnet.networks.cascade import build_model
from remnet.services.inference_service import inference_service
from remnet.services.split_service import split_service
from remnet.services.training_service import training_service
from remnet.utils.exceptions import ConstraintError

logger = logging.getLogger(__name__)

DESK_ACCURACY_THRESHOLD = 90.0
CASCADE_EPOCH = 5
ACCURACY_SLACK = 1.0


class ExperimentService:
    """Train-and-evaluate loops repeated over seeds"""

    def train_and_evaluate(self, config: RunConfig, records: Sequence[ImageRecord], seed: int,
                           out_dir: Union[str, Path], variant: str = "configured",
                           loss_epoch: Optional[int] = None) -> SeedOutcome:
        """Split, train from scratch and score the best checkpoint on the held-out devices"""
        out_dir = Path(out_dir)
        data = config.data
        split = split_service.split_by_device_scene(
            records, val_ratio=data.val_ratio, test_scene_ratio=data.test_scene_ratio, seed=seed
        )
        if not split.train or not split.val or not split.test:
            raise ConstraintError(
                "experiment needs non-empty train, validation and test splits",
                {"train": len(split.train), "val": len(split.val), "test": len(split.test)},
            )
        train_clusters = training_service.prepare_clusters(split.train, data)
        val_clusters = training_service.prepare_clusters(split.val, data)

        model = build_model(config.architecture, seed)
        train_config = config.train.model_copy(update={"seed": seed})
        result = training_service.train(model, train_clusters, val_clusters, train_config, out_dir, config.architecture)

        best, _ = inference_service.load_model(out_dir / settings.checkpoint_name)
        _, metrics = inference_service.evaluate(
            best, split.test, n_votes=config.evaluation.n_votes, stride=data.candidate_stride,
            constants=data.quality, cluster_size=data.cluster_size,
        )
        loss_at = None
        if loss_epoch is not None and result.history:
            loss_at = result.history[min(loss_epoch, len(result.history)) - 1].val_loss
        outcome = SeedOutcome(
            seed=seed, variant=variant, accuracy=metrics.accuracy, val_loss_at_epoch=loss_at,
            best_epoch=result.best_epoch, epochs=len(result.history),
        )
        logger.info(f"[{variant} seed {seed}] accuracy {outcome.accuracy:.2f}% after {outcome.epochs} epochs")
        return outcome

    def desk_reproduction(self, config: RunConfig, records: Sequence[ImageRecord], seeds: Sequence[int],
                          out_dir: Union[str, Path], threshold: float = DESK_ACCURACY_THRESHOLD,
                          required: int = 2) -> ExperimentReport:
        """Held-out-device accuracy reaches ``threshold`` on at least ``required`` seeds"""
        out_dir = Path(out_dir)
        report = ExperimentReport(name="desk_reproduction", seeds=list(seeds))
        for seed in seeds:
            report.outcomes.append(self.train_and_evaluate(config, records, seed, out_dir / f"seed_{seed}"))
        report.seeds_passed = sum(o.accuracy >= threshold for o in report.outcomes)
        report.checks = {f"accuracy >= {threshold:g} on {required} seeds": report.seeds_passed >= required}
        report.passed = all(report.checks.values())
        return report

    def cascade_benefit(self, config: RunConfig, records: Sequence[ImageRecord], seeds: Sequence[int],
                        out_dir: Union[str, Path], epoch: int = CASCADE_EPOCH, required: int = 2,
                        slack: float = ACCURACY_SLACK) -> ExperimentReport:
        """Preprocessing blocks lower the validation loss at ``epoch`` and cost at most ``slack`` accuracy"""
        if config.architecture.preprocessing == PreprocessingKind.NONE:
            raise ConstraintError("cascade_benefit needs an architecture with preprocessing blocks")
        out_dir = Path(out_dir)
        bare = config.model_copy(update={
            "architecture": config.architecture.model_copy(update={"preprocessing": PreprocessingKind.NONE}),
        })
        report = ExperimentReport(name="cascade_benefit", seeds=list(seeds))
        cascade: List[SeedOutcome] = []
        alone: List[SeedOutcome] = []
        for seed in seeds:
            cascade.append(self.train_and_evaluate(config, records, seed, out_dir / f"cascade_seed_{seed}",
                                                   variant="cascade", loss_epoch=epoch))
            alone.append(self.train_and_evaluate(bare, records, seed, out_dir / f"bare_seed_{seed}",
                                                 variant="bare", loss_epoch=epoch))
        report.outcomes = cascade + alone

        report.seeds_passed = sum(c.val_loss_at_epoch < b.val_loss_at_epoch for c, b in zip(cascade, alone))
        cascade_accuracy = sum(o.accuracy for o in cascade) / len(cascade)
        bare_accuracy = sum(o.accuracy for o in alone) / len(alone)
        report.checks = {
            f"lower val loss at epoch {epoch} on {required} seeds": report.seeds_passed >= required,
            f"accuracy within {slack:g} point of the bare classifier": cascade_accuracy >= bare_accuracy - slack,
        }
        report.passed = all(report.checks.values())
        return report


# Global instance
experiment_service = ExperimentService()
