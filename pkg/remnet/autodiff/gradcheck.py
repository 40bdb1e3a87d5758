"""Central finite-difference gradient checks at 64-bit precision.

The scalar objective is ``sum(op(*inputs) * w)`` for a fixed random ``w``, so
every output element contributes to the checked gradient.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from remnet.autodiff import functional as F
from remnet.autodiff.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

GRADCHECK_DTYPE = np.float64
DEFAULT_TOLERANCE = 1e-4
DEFAULT_STEP = 1e-6
# Entries smaller than SCALE_FLOOR times the largest gradient of the same input
# are compared against that scale instead of their own magnitude
SCALE_FLOOR = 1e-3
ABSOLUTE_FLOOR = 1e-8


@dataclass
class GradcheckResult:
    """Outcome of one op checked on one random instance"""
    name: str
    seed: int
    max_relative_error: Dict[str, float] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def worst(self) -> float:
        return max(self.max_relative_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst)) and self.worst < self.tolerance


@dataclass
class GradcheckReport:
    results: List[GradcheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[GradcheckResult]:
        return [r for r in self.results if not r.passed]

    def rows(self) -> List[dict]:
        return [
            {
                "op": r.name,
                "seed": r.seed,
                "max_relative_error": r.worst,
                "per_input": dict(r.max_relative_error),
                "passed": r.passed,
            }
            for r in self.results
        ]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = float(np.abs(numeric).max()) if numeric.size else 0.0
    floor = max(ABSOLUTE_FLOOR, SCALE_FLOOR * scale)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def finite_difference_gradcheck(
    op: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    tolerance: float = DEFAULT_TOLERANCE,
    name: str = "op",
    seed: int = 0,
    step: float = DEFAULT_STEP,
    input_names: Sequence[str] = None,
) -> GradcheckResult:
    """Compare analytic gradients of ``op`` with central differences.

    Failures are reported through the returned result, never raised.
    """
    arrays = [np.array(a, dtype=GRADCHECK_DTYPE) for a in inputs]
    names = list(input_names) if input_names else [f"input{i}" for i in range(len(arrays))]
    rng = np.random.default_rng(seed + 7919)

    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = op(*tensors)
    weights = np.asarray(rng.standard_normal(out.shape), dtype=GRADCHECK_DTYPE)
    result = GradcheckResult(name=name, seed=seed, tolerance=tolerance)
    if not out.requires_grad:
        for n in names:
            result.max_relative_error[n] = float("inf")
        return result
    out.backward(weights)

    def objective(values: List[np.ndarray]) -> float:
        with no_grad():
            y = op(*[Tensor(v) for v in values])
        return float(np.sum(y.data * weights))

    for idx, (array, tensor) in enumerate(zip(arrays, tensors)):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(array)
        numeric = np.zeros_like(array)
        flat = array.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + step
            plus = objective(arrays)
            flat[k] = original - step
            minus = objective(arrays)
            flat[k] = original
            numeric.reshape(-1)[k] = (plus - minus) / (2.0 * step)
        err = relative_error(analytic, numeric)
        result.max_relative_error[names[idx]] = float(err.max()) if err.size else 0.0

    if not result.passed:
        logger.warning(f"Gradcheck {name} (seed {seed}) exceeded tolerance: {result.max_relative_error}")
    return result


def _away_from_zero(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Random values with |v| >= 0.1, keeping kinks out of the difference stencil"""
    v = rng.standard_normal(shape)
    return np.sign(v) * (0.1 + np.abs(v))


def _standard_cases(rng: np.random.Generator) -> Iterable[Tuple[str, Callable[..., Tensor], List[np.ndarray], List[str]]]:
    def conv(stride, padding):
        return lambda x, w, b: F.conv2d(x, w, b, stride=stride, padding=padding)

    yield "conv2d_same_s1", conv(1, "same"), [rng.standard_normal((1, 5, 5, 2)), rng.standard_normal((3, 3, 2, 3)), rng.standard_normal(3)], ["input", "weight", "bias"]
    yield "conv2d_same_s2", conv(2, "same"), [rng.standard_normal((2, 6, 5, 2)), rng.standard_normal((2, 2, 2, 2)), rng.standard_normal(2)], ["input", "weight", "bias"]
    yield "conv2d_valid_s1", conv(1, "valid"), [rng.standard_normal((1, 5, 4, 2)), rng.standard_normal((3, 3, 2, 2)), rng.standard_normal(2)], ["input", "weight", "bias"]

    stats = F.BatchNormStats(3)
    yield "batch_norm_train", (lambda x, g, b: F.batch_norm(x, g, b, stats, training=True)), [
        rng.standard_normal((2, 2, 2, 3)),
        1.0 + 0.1 * rng.standard_normal(3),
        rng.standard_normal(3),
    ], ["input", "gamma", "beta"]

    yield "prelu", F.prelu, [_away_from_zero(rng, (2, 3, 3, 4)), rng.uniform(0.05, 0.5, 4)], ["input", "alpha"]
    yield "relu", F.relu, [_away_from_zero(rng, (2, 3, 3, 4))], ["input"]
    yield "avg_pool", (lambda x: F.avg_pool(x, 2)), [rng.standard_normal((2, 4, 4, 3))], ["input"]
    yield "channel_concat", F.channel_concat, [rng.standard_normal((2, 3, 3, 2)), rng.standard_normal((2, 3, 3, 3))], ["a", "b"]
    yield "channel_slice", (lambda x: F.channel_slice(x, 1, 3)), [rng.standard_normal((2, 3, 3, 4))], ["input"]
    yield "pointwise_sub", F.pointwise_sub, [rng.standard_normal((2, 3, 3, 3)), rng.standard_normal((2, 3, 3, 3))], ["a", "b"]
    yield "reshape", (lambda x: F.reshape(x, (2, -1))), [rng.standard_normal((2, 1, 1, 5))], ["input"]

    labels = rng.integers(0, 5, size=2)
    yield "softmax_cross_entropy", (lambda z: F.softmax_cross_entropy(z, labels)[0]), [rng.standard_normal((2, 5))], ["logits"]

    # y = x - H(x) with x fanning out to both the subtraction and H
    fan_stats = F.BatchNormStats(2)

    def remnant_like(x, w, b, g, beta):
        h = F.batch_norm(F.conv2d(x, w, b), g, beta, fan_stats, training=True)
        return F.pointwise_sub(x, h)

    yield "fan_out_subtraction", remnant_like, [
        rng.standard_normal((2, 4, 4, 2)),
        rng.standard_normal((3, 3, 2, 2)),
        rng.standard_normal(2),
        1.0 + 0.1 * rng.standard_normal(2),
        rng.standard_normal(2),
    ], ["input", "weight", "bias", "gamma", "beta"]


def run_gradcheck_suite(seeds: Iterable[int] = range(5), tolerance: float = DEFAULT_TOLERANCE) -> GradcheckReport:
    """Check every differentiable op on one random instance per seed"""
    report = GradcheckReport()
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for name, op, inputs, names in _standard_cases(rng):
            result = finite_difference_gradcheck(
                op, inputs, tolerance=tolerance, name=name, seed=seed, input_names=names
            )
            logger.debug(f"gradcheck {name} seed={seed} worst={result.worst:.3e}")
            report.results.append(result)
    return report
