"""Classification heads: the RemNet block and a small stand-in for cascade experiments"""

from typing import List, Tuple

import numpy as np

from remnet.autodiff import functional as F
from remnet.autodiff.tensor import Tensor, no_grad
from remnet.models.architecture import ClassifierConfig
from remnet.models.base import ActivationKind
from remnet.networks.module import BatchNorm2d, Conv2d, Module, PReLU, ReLU, Trace, _record
from remnet.utils.exceptions import ShapeError


class ConvBNAct(Module):
    """Strided conv, batch norm, then PReLU or ReLU"""

    def __init__(
        self,
        in_channels: int,
        filters: int,
        kernel: int,
        stride: int,
        activation: ActivationKind,
        rng: np.random.Generator,
        bn_momentum: float = 0.9,
        bn_eps: float = 1e-5,
        prelu_init: float = 0.25,
    ):
        super().__init__()
        self.conv = Conv2d(in_channels, filters, kernel, rng, stride=stride)
        self.bn = BatchNorm2d(filters, bn_momentum, bn_eps)
        self.act = PReLU(filters, prelu_init) if activation == ActivationKind.PRELU else ReLU()

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        y = self.act(self.bn(self.conv(x)))
        _record(trace, "conv_bn_act", y)
        return y


class _Head(Module):
    """Shared input check and probability helper for classification heads"""

    input_size: int
    in_channels: int = 3
    n_class: int

    @property
    def expected_input_shape(self) -> Tuple[int, int, int]:
        return (self.input_size, self.input_size, self.in_channels)

    def _check_input(self, x: Tensor) -> None:
        if x.ndim != 4 or tuple(x.shape[1:]) != self.expected_input_shape:
            raise ShapeError(
                f"{type(self).__name__} expects (B,{self.input_size},{self.input_size},{self.in_channels}) "
                f"input, got {x.shape}",
                {"shape": list(x.shape), "expected": list(self.expected_input_shape)},
            )

    def probabilities(self, x: Tensor) -> np.ndarray:
        with no_grad():
            return F.softmax(self.forward(x).data)


class ClassificationBlock(_Head):
    """Four strided conv layers, average pool to 1x1, then a 1x1 conv to class logits.

    No fully connected layer; the 1x1 conv plays that role on the pooled map.
    """

    def __init__(
        self,
        config: ClassifierConfig,
        rng: np.random.Generator,
        bn_momentum: float = 0.9,
        bn_eps: float = 1e-5,
        prelu_init: float = 0.25,
    ):
        super().__init__()
        self.in_channels = config.in_channels
        self.n_class = config.n_class
        self.pool_window = config.pool_window
        self.input_size = config.input_size
        layers: List[ConvBNAct] = []
        channels = config.in_channels
        for spec in config.layers:
            layers.append(
                ConvBNAct(channels, spec.filters, spec.kernel, spec.stride, config.activation, rng,
                          bn_momentum, bn_eps, prelu_init)
            )
            channels = spec.filters
        self.layers = layers
        self.final = Conv2d(channels, config.n_class, 1, rng)

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        self._check_input(x)
        for layer in self.layers:
            x = layer(x, trace)
        x = F.avg_pool(x, self.pool_window)
        _record(trace, "avg_pool", x)
        x = self.final(x, trace)
        return F.reshape(x, (x.shape[0], self.n_class))


class ToyClassifier(_Head):
    """Two strided convs with PReLU, global average pool, 1x1 conv"""

    def __init__(
        self,
        n_class: int,
        rng: np.random.Generator,
        filters: Tuple[int, int] = (32, 64),
        input_size: int = 64,
        kernel: int = 3,
        prelu_init: float = 0.25,
    ):
        super().__init__()
        if input_size % 4:
            raise ShapeError(f"toy classifier input size must be divisible by 4, got {input_size}")
        self.in_channels = 3
        self.n_class = n_class
        self.input_size = input_size
        self.conv1 = Conv2d(3, filters[0], kernel, rng, stride=2)
        self.act1 = PReLU(filters[0], prelu_init)
        self.conv2 = Conv2d(filters[0], filters[1], kernel, rng, stride=2)
        self.act2 = PReLU(filters[1], prelu_init)
        self.final = Conv2d(filters[1], n_class, 1, rng)

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        self._check_input(x)
        x = self.act1(self.conv1(x, trace))
        x = self.act2(self.conv2(x, trace))
        x = F.avg_pool(x, self.input_size // 4)
        _record(trace, "avg_pool", x)
        x = self.final(x, trace)
        return F.reshape(x, (x.shape[0], self.n_class))
