"""Image manipulations for training-set augmentation and test-time robustness checks"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from remnet.config import settings
from remnet.models.base import AugmentationKind
from remnet.models.dataset import AugmentationSpec, ImageRecord, training_augmentations
from remnet.utils.exceptions import DatasetWriteError
from remnet.utils.image_processing import ImageProcessor

logger = logging.getLogger(__name__)


class AugmentationService:
    """Service applying AugmentationSpecs to 8-bit RGB images"""

    def augment(self, pixels: np.ndarray, spec: AugmentationSpec) -> np.ndarray:
        """Return a new uint8 image; ``none`` is an exact copy"""
        if spec.kind == AugmentationKind.NONE:
            return pixels.copy()
        if spec.kind == AugmentationKind.GAMMA:
            return ImageProcessor.gamma_correct(pixels, spec.factor)
        if spec.kind == AugmentationKind.RESCALE:
            if spec.factor == 1.0:
                return pixels.copy()
            return ImageProcessor.rescale_bicubic(pixels, spec.factor)
        return ImageProcessor.jpeg_round_trip(pixels, quality=int(round(spec.factor)))

    def augment_manifest(
        self,
        records: Sequence[ImageRecord],
        out_dir: Union[str, Path],
        specs: Optional[Sequence[AugmentationSpec]] = None,
        workers: Optional[int] = None,
    ) -> List[ImageRecord]:
        """Expand each image into itself plus one copy per spec.

        Augmented images are stored as PNG under ``out_dir/images``; the
        unaltered entry keeps pointing at the original file. Device, scene and
        label carry over unchanged.
        """
        specs = list(specs) if specs is not None else training_augmentations()
        image_dir = Path(out_dir) / "images"
        workers = workers or settings.worker_count

        def expand(indexed):
            index, record = indexed
            pixels = ImageProcessor.load_rgb(record.path)
            height, width = pixels.shape[:2]
            out = [record.model_copy(update={"width": width, "height": height})]
            stem = f"{index:06d}_{Path(record.path).stem}"
            for spec in specs:
                augmented = self.augment(pixels, spec)
                target = image_dir / f"{stem}_{spec.tag}.png"
                try:
                    ImageProcessor.save_png(augmented, target)
                except OSError as e:
                    raise DatasetWriteError(f"Failed to write {target}: {e}", {"path": str(target)})
                out.append(record.model_copy(update={
                    "path": str(target),
                    "height": augmented.shape[0],
                    "width": augmented.shape[1],
                }))
            return out

        with ThreadPoolExecutor(max_workers=workers) as pool:
            expanded = list(pool.map(expand, enumerate(records)))

        result = [r for group in expanded for r in group]
        logger.info(
            f"Augmented {len(records)} images into {len(result)} "
            f"({len(specs)} manipulations + original each)"
        )
        return result


# Global instance
augmentation_service = AugmentationService()
