"""Dataset records and data-pipeline schemas"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from remnet.models.base import AugmentationKind

# Factors used to build the augmented training set (1 unaltered + 9 copies)
TRAIN_JPEG_QUALITIES = (70, 80, 90)
TRAIN_RESCALE_FACTORS = (0.5, 0.8, 1.5, 2.0)
TRAIN_GAMMAS = (0.8, 1.2)

# Test-time manipulations for the weighted score
MANIPULATION_GAMMAS = (0.5, 0.75, 1.25, 1.5)
MANIPULATION_JPEG_QUALITIES = (95, 90, 85, 80)
MANIPULATION_RESCALE_FACTORS = (0.8, 0.9, 1.1, 1.2)

LEGAL_FACTORS: Dict[AugmentationKind, Tuple[float, ...]] = {
    AugmentationKind.JPEG: tuple(sorted(set(TRAIN_JPEG_QUALITIES) | set(MANIPULATION_JPEG_QUALITIES))),
    AugmentationKind.RESCALE: tuple(sorted(set(TRAIN_RESCALE_FACTORS) | set(MANIPULATION_RESCALE_FACTORS) | {1.0})),
    AugmentationKind.GAMMA: tuple(sorted(set(TRAIN_GAMMAS) | set(MANIPULATION_GAMMAS) | {1.0})),
}

MANIFEST_COLUMNS = ("path", "model_label", "device_id", "scene_id")


class ImageRecord(BaseModel):
    """One manifest row"""
    model_config = ConfigDict(protected_namespaces=())

    path: str
    model_label: int = Field(ge=0)
    device_id: str
    scene_id: str
    width: int = 0
    height: int = 0

    @property
    def cluster_eligible(self) -> bool:
        return self.width >= 256 and self.height >= 256


class QualityConstants(BaseModel):
    alpha: float = 0.7
    beta: float = 4.0
    gamma: float = math.log(0.01)


class AugmentationSpec(BaseModel):
    """A single image manipulation with its strength"""
    kind: AugmentationKind = AugmentationKind.NONE
    factor: float = 1.0

    @model_validator(mode="after")
    def _legal_factor(self):
        if self.kind == AugmentationKind.NONE:
            return self
        legal = LEGAL_FACTORS[self.kind]
        if not any(math.isclose(self.factor, f, rel_tol=0, abs_tol=1e-9) for f in legal):
            raise ValueError(f"unsupported {self.kind.value} factor {self.factor}; legal values are {list(legal)}")
        return self

    @property
    def tag(self) -> str:
        """Filesystem-safe label, e.g. ``jpeg70`` or ``gamma0.8``"""
        if self.kind == AugmentationKind.NONE:
            return "orig"
        if self.kind == AugmentationKind.JPEG:
            return f"jpeg{int(round(self.factor))}"
        return f"{self.kind.value}{self.factor:g}"


def training_augmentations() -> List[AugmentationSpec]:
    specs = [AugmentationSpec(kind=AugmentationKind.JPEG, factor=q) for q in TRAIN_JPEG_QUALITIES]
    specs += [AugmentationSpec(kind=AugmentationKind.RESCALE, factor=s) for s in TRAIN_RESCALE_FACTORS]
    specs += [AugmentationSpec(kind=AugmentationKind.GAMMA, factor=g) for g in TRAIN_GAMMAS]
    return specs


def manipulation_sets() -> Dict[str, List[AugmentationSpec]]:
    """Test-time manipulation families keyed by name"""
    return {
        "gamma": [AugmentationSpec(kind=AugmentationKind.GAMMA, factor=g) for g in MANIPULATION_GAMMAS],
        "jpeg": [AugmentationSpec(kind=AugmentationKind.JPEG, factor=q) for q in MANIPULATION_JPEG_QUALITIES],
        "rescale": [AugmentationSpec(kind=AugmentationKind.RESCALE, factor=s) for s in MANIPULATION_RESCALE_FACTORS],
    }


class SplitResult(BaseModel):
    train: List[ImageRecord] = Field(default_factory=list)
    val: List[ImageRecord] = Field(default_factory=list)
    test: List[ImageRecord] = Field(default_factory=list)
    discarded: int = 0
    violations: List[str] = Field(default_factory=list)


@dataclass
class ClusterRecord:
    """A quality-scored square region of an image; pixels stay uint8"""
    source: ImageRecord
    origin: Tuple[int, int]
    size: int
    quality: float
    pixels: np.ndarray = field(repr=False)

    @property
    def label(self) -> int:
        return self.source.model_label



class ClusterSelection(list):
    """Clusters extracted from one image, remembering how many were requested"""

    def __init__(self, clusters=(), requested: int = 0):
        super().__init__(clusters)
        self.requested = requested

    @property
    def shortfall(self) -> int:
        """Requested clusters the image could not supply"""
        return max(0, self.requested - len(self))
