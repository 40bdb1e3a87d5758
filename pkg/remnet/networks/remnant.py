"""Remnant blocks and the fixed-filter front ends they are compared against"""

import numpy as np

from remnet.autodiff import functional as F
from remnet.autodiff.tensor import Tensor
from remnet.models.architecture import RemnantBlockConfig
from remnet.models.base import ActivationKind, PreprocessingKind
from remnet.networks.module import BatchNorm2d, Conv2d, Module, PReLU, Trace, _record
from remnet.utils.exceptions import ShapeError
from remnet.utils.image_processing import ImageProcessor


class RemnantBlock(Module):
    """Activation-free conv stack whose output is subtracted from BN(x).

    xb = BN(x); h1 = BN(conv(xb)); h2 = BN(conv([xb, h1])); h3 = BN(conv([xb, h2]))
    and the block returns xb - h3. The same xb feeds every skip.
    """

    def __init__(
        self,
        config: RemnantBlockConfig,
        rng: np.random.Generator,
        bn_momentum: float = 0.9,
        bn_eps: float = 1e-5,
        prelu_init: float = 0.25,
    ):
        super().__init__()
        c, f, k = config.in_channels, config.widen_filters, config.kernel_size
        self.in_channels = c
        self.widen_filters = f
        self.bn_in = BatchNorm2d(c, bn_momentum, bn_eps)
        self.conv1 = Conv2d(c, f, k, rng)
        self.bn1 = BatchNorm2d(f, bn_momentum, bn_eps)
        self.conv2 = Conv2d(c + f, f, k, rng)
        self.bn2 = BatchNorm2d(f, bn_momentum, bn_eps)
        self.conv3 = Conv2d(c + f, c, k, rng)
        self.bn3 = BatchNorm2d(c, bn_momentum, bn_eps)
        if config.activation == ActivationKind.PRELU:
            self.act1 = PReLU(f, prelu_init)
            self.act2 = PReLU(f, prelu_init)
        else:
            self.act1 = None
            self.act2 = None

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        if x.ndim != 4 or x.shape[-1] != self.in_channels:
            raise ShapeError(
                f"remnant block expects (B,H,W,{self.in_channels}) input, got {x.shape}",
                {"shape": list(x.shape)},
            )
        xb = self.bn_in(x)
        h1 = self.bn1(self.conv1(xb))
        if self.act1 is not None:
            h1 = self.act1(h1)
        h2 = self.bn2(self.conv2(F.channel_concat(xb, h1)))
        if self.act2 is not None:
            h2 = self.act2(h2)
        h3 = self.bn3(self.conv3(F.channel_concat(xb, h2)))
        y = F.pointwise_sub(xb, h3)
        _record(trace, "remnant", y)
        return y


class FixedFilterBlock(Module):
    """Non-trainable residue front end (median residue or high-pass)"""

    def __init__(self, kind: PreprocessingKind):
        super().__init__()
        if kind not in (PreprocessingKind.MEDIAN_RESIDUAL, PreprocessingKind.HIGHPASS):
            raise ShapeError(f"no fixed filter for preprocessing kind {kind!r}")
        self.kind = PreprocessingKind(kind)

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        if self.kind == PreprocessingKind.MEDIAN_RESIDUAL:
            data = ImageProcessor.median_residual(x.data)
        else:
            data = ImageProcessor.highpass_filter(x.data)
        y = Tensor(data.astype(x.dtype, copy=False))
        _record(trace, self.kind.value, y)
        return y
