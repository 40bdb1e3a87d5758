"""Reverse-mode autodiff engine and the ops RemNet needs"""

from remnet.autodiff.tensor import Tensor, Parameter, GraphNode, no_grad, is_grad_enabled
from remnet.autodiff.functional import (
    BatchNormStats,
    avg_pool,
    batch_norm,
    channel_concat,
    channel_slice,
    conv2d,
    pointwise_sub,
    prelu,
    relu,
    reshape,
    softmax,
    softmax_cross_entropy,
)
from remnet.autodiff.init import glorot_uniform_init
from remnet.autodiff.optim import Adam, PlateauScheduler, adam_step
from remnet.autodiff.gradcheck import GradcheckReport, GradcheckResult, finite_difference_gradcheck, run_gradcheck_suite
from remnet.autodiff.checkpoint import CheckpointData, load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "BatchNormStats",
    "CheckpointData",
    "GradcheckReport",
    "GradcheckResult",
    "GraphNode",
    "Parameter",
    "PlateauScheduler",
    "Tensor",
    "adam_step",
    "avg_pool",
    "batch_norm",
    "channel_concat",
    "channel_slice",
    "conv2d",
    "finite_difference_gradcheck",
    "glorot_uniform_init",
    "is_grad_enabled",
    "load_checkpoint",
    "no_grad",
    "pointwise_sub",
    "prelu",
    "relu",
    "reshape",
    "run_gradcheck_suite",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
