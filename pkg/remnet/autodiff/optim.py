"""Adam optimizer and reduce-on-plateau learning-rate schedule"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from remnet.autodiff.tensor import Parameter
from remnet.utils.exceptions import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)


class Adam:
    """Adam with bias correction; moment buffers live on each ``Parameter``"""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params: List[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, grads: Optional[Sequence[Optional[np.ndarray]]] = None) -> None:
        """Apply one update; ``grads`` defaults to each parameter's ``.grad``.

        The whole step is rejected (no parameter touched) if any gradient is
        non-finite.
        """
        if grads is None:
            grads = [p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ShapeError(f"{len(grads)} gradients for {len(self.params)} parameters")

        resolved = []
        bad = []
        for p, g in zip(self.params, grads):
            if g is None:
                g = np.zeros_like(p.data)
            g = np.asarray(g)
            if g.shape != p.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} does not match parameter {p.name!r} shape {p.shape}"
                )
            if not np.all(np.isfinite(g)):
                bad.append(p.name)
            resolved.append(g)
        if bad:
            logger.error(f"Rejected optimizer step: non-finite gradients in {bad}")
            raise NonFiniteError("non-finite gradient; optimizer step rejected", {"parameters": bad})

        b1, b2 = self.beta1, self.beta2
        for p, g in zip(self.params, resolved):
            p.step_count += 1
            t = p.step_count
            p.adam_m = (b1 * p.adam_m + (1.0 - b1) * g).astype(p.dtype, copy=False)
            p.adam_v = (b2 * p.adam_v + (1.0 - b2) * g * g).astype(p.dtype, copy=False)
            m_hat = p.adam_m / (1.0 - b1 ** t)
            v_hat = p.adam_v / (1.0 - b2 ** t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype, copy=False)


def adam_step(params: Sequence[Parameter], grads: Sequence[np.ndarray], lr: float) -> None:
    """One-shot Adam update with default betas/epsilon"""
    Adam(params, lr=lr).step(grads)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement.

    Improvement means ``val_loss < best - min_delta``. The counter resets after
    every reduction. ``should_stop`` turns true once the rate falls below
    ``lr_floor``.
    """

    def __init__(
        self,
        lr_init: float,
        factor: float = 0.5,
        patience: int = 2,
        lr_floor: float = 1e-7,
        min_delta: float = 0.0,
    ):
        self.lr = lr_init
        self.factor = factor
        self.patience = patience
        self.lr_floor = lr_floor
        self.min_delta = min_delta
        self.best = math.inf
        self.bad_epochs = 0
        self.num_reductions = 0

    def step(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; True if the rate was reduced"""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.lr *= self.factor
            self.bad_epochs = 0
            self.num_reductions += 1
            logger.info(f"Validation loss plateaued; learning rate reduced to {self.lr:.3e}")
            return True
        return False

    @property
    def should_stop(self) -> bool:
        return self.lr < self.lr_floor

    def state_dict(self) -> dict:
        return {
            "lr": self.lr,
            "best": self.best,
            "bad_epochs": self.bad_epochs,
            "num_reductions": self.num_reductions,
        }
