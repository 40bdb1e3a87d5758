"""Device- and scene-disjoint train/val/test splitting"""

import logging
from collections import defaultdict
from typing import Dict, List, Sequence

import numpy as np

from remnet.models.dataset import ImageRecord, SplitResult
from remnet.utils.exceptions import ConstraintError

logger = logging.getLogger(__name__)


class SplitService:
    """Service for building splits where test devices and scenes never reach training"""

    @staticmethod
    def test_scene_count(n_scenes: int, ratio: float) -> int:
        if n_scenes < 2:
            return 0
        return min(max(1, int(round(ratio * n_scenes))), n_scenes - 1)

    def split_by_device_scene(
        self,
        records: Sequence[ImageRecord],
        val_ratio: float = 0.15,
        test_scene_ratio: float = 0.25,
        seed: int = 0,
    ) -> SplitResult:
        """Per model, hold out the last device (sorted) for test.

        Test scenes are the last ``test_scene_ratio`` share of all scene ids
        (sorted). Test keeps images of the held-out device on test scenes,
        train/val keep images of the other devices on the remaining scenes,
        and anything else is discarded. Train/val is a seeded per-model split.
        """
        by_model: Dict[int, List[ImageRecord]] = defaultdict(list)
        for record in records:
            by_model[record.model_label].append(record)

        single = {m: sorted({r.device_id for r in rs}) for m, rs in by_model.items()}
        single = {m: d for m, d in single.items() if len(d) < 2}
        if single:
            raise ConstraintError(
                f"camera models with a single device cannot be split: {sorted(single)}",
                {"models": {str(m): d for m, d in single.items()}},
            )

        scenes = sorted({r.scene_id for r in records})
        n_test = self.test_scene_count(len(scenes), test_scene_ratio)
        test_scenes = set(scenes[len(scenes) - n_test:]) if n_test else set()

        result = SplitResult()
        if not test_scenes:
            result.violations.append(
                f"only {len(scenes)} scene(s): cannot keep test scenes disjoint from training"
            )

        for model in sorted(by_model):
            model_records = sorted(by_model[model], key=lambda r: r.path)
            devices = sorted({r.device_id for r in model_records})
            test_device = devices[-1]

            test = [r for r in model_records if r.device_id == test_device and r.scene_id in test_scenes]
            pool = [r for r in model_records if r.device_id != test_device and r.scene_id not in test_scenes]
            result.discarded += len(model_records) - len(test) - len(pool)

            if not test:
                result.violations.append(f"model {model}: device {test_device} has no images on test scenes")
            if not pool:
                result.violations.append(f"model {model}: no images left for train/val")

            rng = np.random.default_rng([seed, model])
            order = rng.permutation(len(pool))
            n_val = int(round(val_ratio * len(pool)))
            if len(pool) >= 2:
                n_val = min(max(n_val, 1), len(pool) - 1)
            else:
                n_val = 0
            val_idx = set(order[:n_val].tolist())
            result.val.extend(r for i, r in enumerate(pool) if i in val_idx)
            result.train.extend(r for i, r in enumerate(pool) if i not in val_idx)
            result.test.extend(test)

        for violation in result.violations:
            logger.warning(f"Split violation: {violation}")
        logger.info(
            f"Split {len(records)} images: train={len(result.train)} val={len(result.val)} "
            f"test={len(result.test)} discarded={result.discarded}"
        )
        return result


# Global instance
split_service = SplitService()
