"""Module base class and the parameterized layers RemNet is built from"""

from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from remnet.autodiff import functional as F
from remnet.autodiff.init import glorot_uniform_init
from remnet.autodiff.tensor import DEFAULT_DTYPE, Parameter, Tensor
from remnet.utils.exceptions import SchemaError

Trace = Optional[List[Tuple[str, Tuple[int, ...]]]]


class Module:
    """Container of parameters, buffers and child modules.

    Attribute names form the dotted parameter path, lists of modules are
    indexed (``remnant.0.conv1.weight``).
    """

    def __init__(self):
        self.training = True

    # -- traversal -------------------------------------------------------
    def named_children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Parameter]]:
        found = []
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                found.append((prefix + name, value))
        for name, child in self.named_children():
            found.extend(child.named_parameters(prefix=f"{prefix}{name}."))
        return found

    def named_buffers(self, prefix: str = "") -> List[Tuple[str, np.ndarray]]:
        found = list((prefix + k, v) for k, v in self._own_buffers().items())
        for name, child in self.named_children():
            found.extend(child.named_buffers(prefix=f"{prefix}{name}."))
        return found

    def _own_buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def _load_own_buffer(self, name: str, value: np.ndarray) -> None:
        raise SchemaError(f"{type(self).__name__} has no buffer {name!r}")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def name_parameters(self) -> None:
        """Stamp each Parameter with its dotted path"""
        for name, p in self.named_parameters():
            p.name = name

    # -- mode --------------------------------------------------------------
    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.named_children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # -- state -------------------------------------------------------------
    def state_dict(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        params = {name: p.data for name, p in self.named_parameters()}
        buffers = dict(self.named_buffers())
        return params, buffers

    def load_state_dict(self, params: Dict[str, np.ndarray], buffers: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(params))
        unexpected = sorted(set(params) - set(own))
        if missing or unexpected:
            raise SchemaError(
                "Checkpoint parameters do not match the model",
                {"missing": missing, "unexpected": unexpected},
            )
        for name, p in own.items():
            value = params[name]
            if value.shape != p.shape:
                raise SchemaError(
                    f"Shape mismatch for {name}: checkpoint {value.shape}, model {p.shape}"
                )
            p.data = np.array(value, dtype=DEFAULT_DTYPE)
        self._load_buffers(buffers, prefix="")

    def _load_buffers(self, buffers: Dict[str, np.ndarray], prefix: str) -> None:
        for key in self._own_buffers():
            full = prefix + key
            if full not in buffers:
                raise SchemaError(f"Checkpoint is missing buffer {full}")
            self._load_own_buffer(key, buffers[full])
        for name, child in self.named_children():
            child._load_buffers(buffers, prefix=f"{prefix}{name}.")

    def __call__(self, x: Tensor, trace: Trace = None) -> Tensor:
        return self.forward(x, trace)

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        raise NotImplementedError


def _record(trace: Trace, label: str, t: Tensor) -> None:
    if trace is not None:
        trace.append((label, tuple(t.shape)))


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: str = "same",
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        shape = (kernel_size, kernel_size, in_channels, out_channels)
        self.weight = Parameter(glorot_uniform_init(shape, rng).data)
        self.bias = Parameter(np.zeros(out_channels, dtype=DEFAULT_DTYPE))

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        y = F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
        _record(trace, "conv", y)
        return y


class BatchNorm2d(Module):
    def __init__(self, num_channels: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.num_channels = num_channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(num_channels, dtype=DEFAULT_DTYPE))
        self.beta = Parameter(np.zeros(num_channels, dtype=DEFAULT_DTYPE))
        self.stats = F.BatchNormStats(num_channels)

    def _own_buffers(self) -> Dict[str, np.ndarray]:
        return {
            "running_mean": self.stats.running_mean,
            "running_var": self.stats.running_var,
            "num_batches_tracked": np.array([self.stats.num_batches_tracked], dtype=DEFAULT_DTYPE),
        }

    def _load_own_buffer(self, name: str, value: np.ndarray) -> None:
        if name == "num_batches_tracked":
            self.stats.num_batches_tracked = int(np.asarray(value).reshape(-1)[0])
        elif name in ("running_mean", "running_var"):
            if value.shape != (self.num_channels,):
                raise SchemaError(f"Buffer {name} has shape {value.shape}, expected ({self.num_channels},)")
            setattr(self.stats, name, np.array(value, dtype=DEFAULT_DTYPE))
        else:
            super()._load_own_buffer(name, value)

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.stats, self.training, self.momentum, self.eps)


class PReLU(Module):
    def __init__(self, num_channels: int, init: float = 0.25):
        super().__init__()
        self.alpha = Parameter(np.full(num_channels, init, dtype=DEFAULT_DTYPE))

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        return F.prelu(x, self.alpha)


class ReLU(Module):
    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        return F.relu(x)
