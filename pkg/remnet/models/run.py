"""Run configuration: the replayable union of every knob a command uses"""

import json
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from remnet.models.architecture import ArchitectureDescriptor
from remnet.models.base import ClusterOrder
from remnet.models.dataset import (
    MANIPULATION_GAMMAS,
    MANIPULATION_JPEG_QUALITIES,
    MANIPULATION_RESCALE_FACTORS,
    QualityConstants,
)
from remnet.models.synth import SynthConfig
from remnet.models.training import TrainConfig
from remnet.utils.exceptions import ConfigError, MissingFileError


class DataConfig(BaseModel):
    manifest: Optional[str] = None
    train_manifest: Optional[str] = None
    val_manifest: Optional[str] = None
    test_manifest: Optional[str] = None
    cluster_size: int = Field(default=256, gt=0)
    patch_size: int = Field(default=64, gt=0)
    clusters_per_image: int = Field(default=20, gt=0)
    candidate_stride: int = Field(default=64, gt=0)
    quality: QualityConstants = Field(default_factory=QualityConstants)
    val_ratio: float = Field(default=0.15, gt=0.0, lt=1.0)
    test_scene_ratio: float = Field(default=0.25, gt=0.0, lt=1.0)
    augment: bool = True
    cache_dir: Optional[str] = None

    @field_validator("patch_size")
    @classmethod
    def _patch_fits(cls, value: int, info) -> int:
        cluster = info.data.get("cluster_size", 256)
        if cluster % value:
            raise ValueError(f"patch_size {value} must divide cluster_size {cluster}")
        return value


class EvalConfig(BaseModel):
    n_votes: int = Field(default=20, gt=0)
    sweep_votes: List[int] = Field(default_factory=lambda: [1, 5, 10, 20])
    sweep_order: ClusterOrder = ClusterOrder.BOTTOM
    manipulations: bool = False
    manipulation_gammas: List[float] = Field(default_factory=lambda: list(MANIPULATION_GAMMAS))
    manipulation_jpeg_qualities: List[int] = Field(default_factory=lambda: list(MANIPULATION_JPEG_QUALITIES))
    manipulation_rescale_factors: List[float] = Field(default_factory=lambda: list(MANIPULATION_RESCALE_FACTORS))

    @field_validator("sweep_votes")
    @classmethod
    def _positive_votes(cls, values: List[int]) -> List[int]:
        if not values or any(v <= 0 for v in values):
            raise ValueError(f"sweep_votes must be positive integers, got {values}")
        return values


class RunConfig(BaseModel):
    seed: int = 0
    out_dir: Optional[str] = None
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    architecture: ArchitectureDescriptor = Field(default_factory=ArchitectureDescriptor)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(str(path))
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}", {"path": str(path)})
        return cls.from_dict(raw, source=str(path))

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<dict>") -> "RunConfig":
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(
                f"Invalid config {source}: {e.error_count()} error(s)",
                {"errors": [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()]},
            )

    def dump(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path
