"""Multi-seed acceptance experiments"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class SeedOutcome(BaseModel):
    """One trained-and-evaluated model of an experiment"""
    seed: int
    variant: str
    accuracy: float
    val_loss_at_epoch: Optional[float] = None
    best_epoch: int
    epochs: int


class ExperimentReport(BaseModel):
    name: str
    seeds: List[int]
    outcomes: List[SeedOutcome] = Field(default_factory=list)
    seeds_passed: int = 0
    checks: Dict[str, bool] = Field(default_factory=dict)
    passed: bool = False
