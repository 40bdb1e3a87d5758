"""Weight initializers"""

from typing import Sequence, Tuple

import numpy as np

from remnet.autodiff.tensor import DEFAULT_DTYPE, Tensor
from remnet.utils.exceptions import ShapeError


def glorot_fans(shape: Sequence[int]) -> Tuple[int, int]:
    """(fan_in, fan_out); conv weights are (K, K, Cin, Cout)"""
    shape = tuple(shape)
    if len(shape) == 4:
        receptive = shape[0] * shape[1]
        return receptive * shape[2], receptive * shape[3]
    if len(shape) == 2:
        return shape[0], shape[1]
    if len(shape) == 1:
        return shape[0], shape[0]
    receptive = int(np.prod(shape[:-2]))
    return receptive * shape[-2], receptive * shape[-1]


def glorot_limit(shape: Sequence[int]) -> float:
    fan_in, fan_out = glorot_fans(shape)
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def glorot_uniform_init(shape: Sequence[int], rng_seed) -> Tensor:
    """Uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).

    ``rng_seed`` may be an int or an existing ``np.random.Generator``.
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ShapeError(f"glorot_uniform_init needs a non-empty positive shape, got {shape}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    limit = glorot_limit(shape)
    values = rng.uniform(-limit, limit, size=shape).astype(DEFAULT_DTYPE)
    # float32 rounding may land a hair outside the float64 bound
    bound = DEFAULT_DTYPE(limit)
    if bound > limit:
        bound = np.nextafter(bound, DEFAULT_DTYPE(0))
    np.clip(values, -bound, bound, out=values)
    return Tensor(values)
