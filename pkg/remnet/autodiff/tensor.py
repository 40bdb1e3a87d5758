"""Tensor type with reverse-mode automatic differentiation.

Every differentiable op creates its output ``Tensor`` together with a
``GraphNode`` that records the parents and a backward rule. The rule maps the
gradient of the output to a tuple of gradients, one per parent (``None`` for
parents that need none). ``Tensor.backward`` walks the graph in reverse
topological order and accumulates gradients additively, so a tensor consumed
by several ops receives the sum of all contributions.
"""

from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from remnet.utils.exceptions import ShapeError

DEFAULT_DTYPE = np.float32

# Context-local: a thread disabling graph recording leaves other threads untouched.
_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar("grad_enabled", default=True)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording a graph"""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


BackwardRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


@dataclass(eq=False)
class GraphNode:
    """Producer record of a non-leaf tensor"""
    op: str
    parents: Tuple["Tensor", ...]
    backward_rule: BackwardRule


class Tensor:
    """n-dimensional real array participating in a differentiable graph.

    Layout for image data is (batch, height, width, channels).
    """

    __array_priority__ = 100

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        dtype=None,
        node: Optional[GraphNode] = None,
    ):
        array = np.asarray(data, dtype=dtype if dtype is not None else None)
        if dtype is None and array.dtype not in (np.float32, np.float64):
            array = array.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node = node

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        op = self.node.op if self.node else "leaf"
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={op}, requires_grad={self.requires_grad})"

    def __sub__(self, other: "Tensor") -> "Tensor":
        from remnet.autodiff.functional import pointwise_sub
        return pointwise_sub(self, other)

    # -- graph construction ----------------------------------------------
    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        op: str,
        parents: Sequence["Tensor"],
        backward_rule: BackwardRule,
    ) -> "Tensor":
        """Wrap an op result, recording the graph only when a parent needs it"""
        needs_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        node = GraphNode(op=op, parents=tuple(parents), backward_rule=backward_rule) if needs_grad else None
        return cls(data, requires_grad=needs_grad, dtype=data.dtype, node=node)

    # -- reverse mode -----------------------------------------------------
    def _topological_order(self) -> list:
        order: list = []
        visited: set = set()
        stack = [(self, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor.node is not None:
                for parent in tensor.node.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf"""
        if not self.requires_grad:
            raise ShapeError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(
                    "backward() without an explicit gradient needs a scalar output",
                    {"shape": list(self.shape)},
                )
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.dtype)
        if grad.shape != self.shape:
            raise ShapeError(
                f"seed gradient shape {grad.shape} does not match tensor shape {self.shape}"
            )

        pending = {id(self): grad}
        for tensor in reversed(self._topological_order()):
            g = pending.pop(id(tensor), None)
            if g is None:
                continue
            if tensor.node is None:
                tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
                continue
            parent_grads = tensor.node.backward_rule(g)
            for parent, pg in zip(tensor.node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg


class Parameter(Tensor):
    """Trainable leaf tensor with Adam moment buffers"""

    def __init__(self, data, name: str = ""):
        super().__init__(np.asarray(data, dtype=DEFAULT_DTYPE), requires_grad=True)
        self.name = name
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape})"
