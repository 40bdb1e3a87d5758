"""Training, checkpoint and evaluation schemas"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from remnet.models.architecture import ArchitectureDescriptor


class TrainConfig(BaseModel):
    batch_size: int = Field(default=64, gt=0)
    lr_init: float = Field(default=1e-3, gt=0.0)
    lr_decay_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    plateau_patience: int = Field(default=2, ge=1)
    lr_floor: float = Field(default=1e-7, gt=0.0)
    max_epochs: int = Field(default=50, gt=0)
    min_delta: float = Field(default=0.0, ge=0.0)
    adam_beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    prefetch_batches: int = Field(default=2, ge=1)
    seed: int = 0


class HistoryRecord(BaseModel):
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


class CheckpointMeta(BaseModel):
    """Header stored inside every checkpoint"""
    epoch: int
    val_loss: float
    seed: int = 0
    architecture: ArchitectureDescriptor


class TrainResult(BaseModel):
    checkpoint_path: str
    best_epoch: int
    best_val_loss: float
    history: List[HistoryRecord] = Field(default_factory=list)
    stopped_by: str = "max_epochs"


class PredictionRecord(BaseModel):
    """Per-image voting outcome, kept for audit"""
    path: str
    true_label: Optional[int] = None
    cluster_labels: List[int] = Field(default_factory=list)
    cluster_probabilities: List[List[float]] = Field(default_factory=list)
    vote_tally: List[int] = Field(default_factory=list)
    final_label: int
    manipulation: str = "none"
    cluster_shortfall: int = Field(default=0, ge=0)

    @property
    def correct(self) -> bool:
        return self.true_label is not None and self.true_label == self.final_label


class EvalMetrics(BaseModel):
    accuracy: float
    n_images: int
    n_correct: int
    n_votes: int
    images_with_shortfall: int = 0
    manipulated_accuracy: Dict[str, float] = Field(default_factory=dict)
    weighted_score: Optional[float] = None
