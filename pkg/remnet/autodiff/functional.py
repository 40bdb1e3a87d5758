"""Differentiable operations used by RemNet and its baselines.

All image tensors are laid out as (batch, height, width, channels) and all
ops compute in the dtype of their inputs, so the same code serves the 32-bit
training path and the 64-bit gradient-check path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from remnet.autodiff.tensor import Tensor
from remnet.utils.exceptions import ConstraintError, ShapeError

PADDING_MODES = ("same", "valid")


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------
def conv_output_geometry(size: int, kernel: int, stride: int, padding: str) -> Tuple[int, int, int]:
    """Return (output extent, pad before, pad after) along one axis.

    "same" padding yields ceil(size / stride) outputs; when the required zero
    count is odd the extra zero goes after (bottom / right).
    """
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if padding == "valid":
        if size < kernel:
            raise ShapeError(f"valid convolution needs extent >= kernel, got {size} < {kernel}")
        return (size - kernel) // stride + 1, 0, 0
    raise ShapeError(f"unknown padding mode {padding!r}; expected one of {PADDING_MODES}")


def accumulator_dtype(*arrays: np.ndarray) -> np.dtype:
    """Forward-sum dtype for conv2d: float64 for 32-bit inputs, else the input dtype"""
    return np.result_type(np.float64, *arrays)


def _check_conv_args(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be (B,H,W,C), got shape {x.shape}")
    if w.ndim != 4 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"conv2d weight must be (K,K,Cin,Cout), got shape {w.shape}")
    if x.shape[3] != w.shape[2]:
        raise ShapeError(
            f"conv2d channel mismatch: input shape {x.shape} has Cin={x.shape[3]}, "
            f"weight shape {w.shape} expects Cin={w.shape[2]}",
            {"input_shape": list(x.shape), "weight_shape": list(w.shape)},
        )
    if b.shape != (w.shape[3],):
        raise ShapeError(f"conv2d bias shape {b.shape} does not match Cout={w.shape[3]}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be >= 1, got {stride}")
    if x.shape[1] < 1 or x.shape[2] < 1:
        raise ShapeError(f"conv2d input spatial extents must be >= 1, got {x.shape}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """2D cross-correlation, NHWC input and (K,K,Cin,Cout) weight.

    The kernel is decomposed into its K*K offsets; each offset contributes one
    (B*Ho*Wo, Cin) x (Cin, Cout) matrix product. The forward sum runs in an
    accumulator at least 64 bits wide and is rounded to the input dtype once,
    so float32 results do not depend on BLAS summation order. The naive loop
    version in ``remnet.autodiff.reference`` is the oracle for this layout.
    """
    xd, wd, bd = x.data, weight.data, bias.data
    _check_conv_args(xd, wd, bd, stride)
    B, H, W, Cin = xd.shape
    K, Cout = wd.shape[0], wd.shape[3]
    Ho, pt, pb = conv_output_geometry(H, K, stride, padding)
    Wo, pl, pr = conv_output_geometry(W, K, stride, padding)

    xp = np.pad(xd, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if (pt or pb or pl or pr) else xd
    row_span = stride * (Ho - 1) + 1
    col_span = stride * (Wo - 1) + 1

    acc_dtype = accumulator_dtype(xd, wd)
    xa = xp.astype(acc_dtype, copy=False)
    wa = wd.astype(acc_dtype, copy=False)
    acc = np.empty((B, Ho, Wo, Cout), dtype=acc_dtype)
    acc[...] = bd
    for u in range(K):
        for v in range(K):
            window = xa[:, u:u + row_span:stride, v:v + col_span:stride, :]
            acc += window @ wa[u, v]
    out = acc.astype(np.result_type(xd, wd), copy=False)

    def backward(g: np.ndarray):
        g2 = g.reshape(-1, Cout)
        gb = g2.sum(axis=0)
        gw = np.empty_like(wd)
        gxp = np.zeros_like(xp)
        for u in range(K):
            for v in range(K):
                window = xp[:, u:u + row_span:stride, v:v + col_span:stride, :]
                gw[u, v] = window.reshape(-1, Cin).T @ g2
                gxp[:, u:u + row_span:stride, v:v + col_span:stride, :] += (g2 @ wd[u, v].T).reshape(B, Ho, Wo, Cin)
        gx = gxp[:, pt:pt + H, pl:pl + W, :]
        return gx, gw, gb

    return Tensor.from_op(out, "conv2d", (x, weight, bias), backward)


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------
@dataclass
class BatchNormStats:
    """Running statistics of one batch-norm layer"""
    num_channels: int
    running_mean: np.ndarray = field(default=None)
    running_var: np.ndarray = field(default=None)
    num_batches_tracked: int = 0

    def __post_init__(self):
        if self.running_mean is None:
            self.running_mean = np.zeros(self.num_channels, dtype=np.float32)
        if self.running_var is None:
            self.running_var = np.ones(self.num_channels, dtype=np.float32)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    stats: BatchNormStats,
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (batch, height, width).

    Train mode normalizes with the batch mean and population variance and
    updates ``stats`` by exponential moving average
    (``running = momentum * running + (1 - momentum) * batch``). Infer mode
    uses the running statistics and fails if none were ever recorded.
    """
    xd = x.data
    C = xd.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(
            f"batch_norm affine parameters must have shape ({C},), got {gamma.shape} / {beta.shape}"
        )
    axes = tuple(range(xd.ndim - 1))
    n = int(np.prod(xd.shape[:-1]))
    gd, bd = gamma.data, beta.data

    if training:
        if n < 2:
            raise ConstraintError(
                f"batch_norm in train mode needs at least 2 values per channel, got {n}",
                {"shape": list(xd.shape)},
            )
        mean = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        invstd = 1.0 / np.sqrt(var + eps)
        xhat = (xd - mean) * invstd
        out = gd * xhat + bd
        stats.running_mean = (momentum * stats.running_mean + (1.0 - momentum) * mean).astype(stats.running_mean.dtype)
        stats.running_var = (momentum * stats.running_var + (1.0 - momentum) * var).astype(stats.running_var.dtype)
        stats.num_batches_tracked += 1

        def backward(g: np.ndarray):
            ggamma = (g * xhat).sum(axis=axes)
            gbeta = g.sum(axis=axes)
            dxhat = g * gd
            gx = (invstd / n) * (
                n * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
            )
            return gx, ggamma, gbeta
    else:
        if stats.num_batches_tracked == 0:
            raise ConstraintError(
                "batch_norm in infer mode before any training statistics were recorded"
            )
        invstd = (1.0 / np.sqrt(stats.running_var + eps)).astype(xd.dtype)
        xhat = (xd - stats.running_mean.astype(xd.dtype)) * invstd
        out = gd * xhat + bd

        def backward(g: np.ndarray):
            return g * gd * invstd, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return Tensor.from_op(out.astype(np.result_type(xd, gd), copy=False), "batch_norm", (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------
def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """Parametric ReLU with one slope per channel (last axis)"""
    xd, ad = x.data, alpha.data
    if ad.shape != (xd.shape[-1],):
        raise ShapeError(f"prelu alpha shape {ad.shape} does not match channel count {xd.shape[-1]}")
    positive = xd > 0
    out = np.where(positive, xd, ad * xd)
    axes = tuple(range(xd.ndim - 1))

    def backward(g: np.ndarray):
        gx = np.where(positive, g, g * ad)
        galpha = np.where(positive, 0, g * xd).sum(axis=axes)
        return gx, galpha

    return Tensor.from_op(out, "prelu", (x, alpha), backward)


def relu(x: Tensor) -> Tensor:
    xd = x.data
    positive = xd > 0
    out = np.where(positive, xd, 0).astype(xd.dtype)

    def backward(g: np.ndarray):
        return (np.where(positive, g, 0).astype(g.dtype),)

    return Tensor.from_op(out, "relu", (x,), backward)


# ---------------------------------------------------------------------------
# Pooling / shape ops
# ---------------------------------------------------------------------------
def avg_pool(x: Tensor, window: int) -> Tensor:
    """Non-overlapping window x window average pooling"""
    xd = x.data
    B, H, W, C = xd.shape
    if window < 1 or H % window or W % window:
        raise ShapeError(
            f"avg_pool window {window} does not divide spatial extents {H}x{W}",
            {"shape": list(xd.shape), "window": window},
        )
    out = xd.reshape(B, H // window, window, W // window, window, C).mean(axis=(2, 4))
    scale = 1.0 / (window * window)

    def backward(g: np.ndarray):
        gx = np.repeat(np.repeat(g, window, axis=1), window, axis=2) * scale
        return (gx.astype(g.dtype, copy=False),)

    return Tensor.from_op(out, "avg_pool", (x,), backward)


def channel_concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the channel axis, channels of ``a`` first"""
    ad, bd = a.data, b.data
    if ad.ndim != bd.ndim or ad.shape[:-1] != bd.shape[:-1]:
        raise ShapeError(
            f"channel_concat needs matching batch/spatial extents, got {ad.shape} and {bd.shape}"
        )
    ca = ad.shape[-1]
    out = np.concatenate([ad, bd], axis=-1)

    def backward(g: np.ndarray):
        return g[..., :ca], g[..., ca:]

    return Tensor.from_op(out, "channel_concat", (a, b), backward)


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    xd = x.data
    C = xd.shape[-1]
    if not 0 <= start <= stop <= C:
        raise ShapeError(f"channel_slice [{start}:{stop}] out of range for {C} channels")
    out = xd[..., start:stop].copy()

    def backward(g: np.ndarray):
        gx = np.zeros_like(xd, dtype=g.dtype)
        gx[..., start:stop] = g
        return (gx,)

    return Tensor.from_op(out, "channel_slice", (x,), backward)


def pointwise_sub(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise a - b for identically shaped tensors"""
    if a.shape != b.shape:
        raise ShapeError(f"pointwise_sub shape mismatch: {a.shape} vs {b.shape}")
    out = a.data - b.data

    def backward(g: np.ndarray):
        return g, -g

    return Tensor.from_op(out, "pointwise_sub", (a, b), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    out = x.data.reshape(shape)

    def backward(g: np.ndarray):
        return (g.reshape(original),)

    return Tensor.from_op(out, "reshape", (x,), backward)


# ---------------------------------------------------------------------------
# Output / loss
# ---------------------------------------------------------------------------
def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (B, N) array"""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tuple[Tensor, np.ndarray]:
    """Mean negative log-likelihood of the true class.

    Returns the scalar loss tensor and the (B, N) probability array.
    """
    zd = logits.data
    if zd.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects (B, N_class) logits, got {zd.shape}")
    B, N = zd.shape
    if N < 2:
        raise ShapeError(f"softmax_cross_entropy needs N_class >= 2, got {N}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != B:
        raise ShapeError(f"{labels.shape[0]} labels for a batch of {B}")
    if labels.size and (labels.min() < 0 or labels.max() >= N):
        raise ConstraintError(
            f"labels must lie in [0, {N}), got range [{labels.min()}, {labels.max()}]"
        )

    shifted = zd - zd.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(B)
    loss_value = (log_norm - shifted[rows, labels]).mean()
    probs = softmax(zd)

    def backward(g: np.ndarray):
        grad = probs.copy()
        grad[rows, labels] -= 1.0
        return ((grad * (g / B)).astype(zd.dtype, copy=False),)

    loss = Tensor.from_op(np.asarray(loss_value, dtype=zd.dtype), "softmax_cross_entropy", (logits,), backward)
    return loss, probs


__all__ = [
    "BatchNormStats",
    "avg_pool",
    "batch_norm",
    "channel_concat",
    "channel_slice",
    "conv2d",
    "conv_output_geometry",
    "pointwise_sub",
    "prelu",
    "relu",
    "reshape",
    "softmax",
    "softmax_cross_entropy",
]
