import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from remnet.autodiff import functional as F
from remnet.autodiff.init import glorot_limit, glorot_uniform_init
from remnet.autodiff.reference import naive_conv2d
from remnet.autodiff.tensor import Tensor, is_grad_enabled, no_grad
from remnet.utils.exceptions import ConstraintError, ShapeError


# -- convolution ---------------------------------------------------------------

@pytest.mark.parametrize(
    "shape, kernel, cout, stride, padding",
    [
        ((2, 7, 7, 3), 3, 4, 1, "same"),
        ((1, 8, 6, 2), 2, 3, 2, "same"),
        ((2, 9, 9, 3), 5, 2, 2, "same"),
        ((1, 6, 7, 4), 3, 5, 1, "valid"),
        ((3, 10, 10, 1), 7, 2, 3, "same"),
    ],
)
def test_conv2d_matches_naive_loop_bit_exactly(shape, kernel, cout, stride, padding):
    gen = np.random.default_rng(sum(shape) + kernel)
    # integer-valued data keeps every partial sum exact in float32
    x = gen.integers(-3, 4, size=shape).astype(np.float32)
    w = gen.integers(-2, 3, size=(kernel, kernel, shape[3], cout)).astype(np.float32)
    b = gen.integers(-2, 3, size=cout).astype(np.float32)

    fast = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding).data
    slow = naive_conv2d(x, w, b, stride=stride, padding=padding)
    assert fast.shape == slow.shape
    assert_array_equal(fast, slow)


@pytest.mark.parametrize("seed", range(5))
def test_conv2d_matches_naive_loop_on_real_valued_float32(seed):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((2, 9, 9, 16)).astype(np.float32)
    w = gen.standard_normal((3, 3, 16, 8)).astype(np.float32)
    b = gen.standard_normal(8).astype(np.float32)
    stride, padding = [(1, "same"), (2, "same"), (1, "valid"), (2, "valid"), (3, "same")][seed]

    fast = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding).data
    slow = naive_conv2d(x, w, b, stride=stride, padding=padding)
    assert fast.dtype == slow.dtype == np.float32
    assert_array_equal(fast, slow)


def test_conv2d_same_padding_box_filter():
    x = Tensor(np.ones((1, 3, 3, 1), dtype=np.float32))
    w = Tensor(np.ones((3, 3, 1, 1), dtype=np.float32))
    out = F.conv2d(x, w, Tensor(np.zeros(1, dtype=np.float32))).data[0, :, :, 0]
    assert_array_equal(out, [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


def test_conv2d_strided_output_extents():
    x = Tensor(np.zeros((2, 64, 64, 3), dtype=np.float32))
    w = Tensor(np.zeros((7, 7, 3, 8), dtype=np.float32))
    assert F.conv2d(x, w, Tensor(np.zeros(8, dtype=np.float32)), stride=2).shape == (2, 32, 32, 8)


def test_conv2d_channel_mismatch_names_both_shapes():
    x = Tensor(np.zeros((1, 4, 4, 3), dtype=np.float32))
    w = Tensor(np.zeros((3, 3, 2, 1), dtype=np.float32))
    with pytest.raises(ShapeError) as info:
        F.conv2d(x, w, Tensor(np.zeros(1, dtype=np.float32)))
    assert "(1, 4, 4, 3)" in info.value.message
    assert "(3, 3, 2, 1)" in info.value.message


def test_conv_geometry_puts_extra_padding_after():
    out, before, after = F.conv_output_geometry(64, 2, 2, "same")
    assert (out, before, after) == (32, 0, 0)
    out, before, after = F.conv_output_geometry(5, 4, 1, "same")
    assert (out, before, after) == (5, 1, 2)


# -- batch norm ------------------------------------------------------------------

def test_batch_norm_train_normalizes_and_updates_running_stats(rng):
    x = (3.0 + 2.0 * rng.standard_normal((4, 5, 5, 2))).astype(np.float32)
    stats = F.BatchNormStats(2)
    gamma = Tensor(np.ones(2, dtype=np.float32))
    beta = Tensor(np.zeros(2, dtype=np.float32))

    y = F.batch_norm(Tensor(x), gamma, beta, stats, training=True).data
    assert_allclose(y.mean(axis=(0, 1, 2)), 0.0, atol=1e-5)
    assert_allclose(y.var(axis=(0, 1, 2)), 1.0, atol=1e-3)

    mean, var = x.mean(axis=(0, 1, 2)), x.var(axis=(0, 1, 2))
    assert_allclose(stats.running_mean, 0.1 * mean, rtol=1e-5)
    assert_allclose(stats.running_var, 0.9 + 0.1 * var, rtol=1e-5)
    assert stats.num_batches_tracked == 1


def test_batch_norm_infer_uses_running_stats():
    stats = F.BatchNormStats(1, running_mean=np.array([2.0], np.float32),
                             running_var=np.array([4.0], np.float32), num_batches_tracked=1)
    x = Tensor(np.full((1, 1, 1, 1), 6.0, dtype=np.float32))
    y = F.batch_norm(x, Tensor(np.ones(1, np.float32)), Tensor(np.zeros(1, np.float32)), stats,
                     training=False, eps=0.0)
    assert_allclose(y.data.ravel(), [2.0])


def test_batch_norm_rejects_infer_without_stats_and_single_value_batches():
    stats = F.BatchNormStats(1)
    gamma, beta = Tensor(np.ones(1, np.float32)), Tensor(np.zeros(1, np.float32))
    with pytest.raises(ConstraintError):
        F.batch_norm(Tensor(np.zeros((2, 2, 2, 1), np.float32)), gamma, beta, stats, training=False)
    with pytest.raises(ConstraintError):
        F.batch_norm(Tensor(np.zeros((1, 1, 1, 1), np.float32)), gamma, beta, stats, training=True)


# -- activations, pooling, shape ops ---------------------------------------------------

def test_prelu_scales_negative_inputs_per_channel():
    x = Tensor(np.array([[[[-2.0, 3.0], [1.0, -4.0]]]], dtype=np.float32))
    y = F.prelu(x, Tensor(np.array([0.25, 0.5], dtype=np.float32))).data
    assert_allclose(y, [[[[-0.5, 3.0], [1.0, -2.0]]]])


def test_avg_pool_averages_windows_and_rejects_ragged_input():
    x = Tensor(np.arange(16, dtype=np.float32).reshape(1, 4, 4, 1))
    y = F.avg_pool(x, 2).data[0, :, :, 0]
    assert_allclose(y, [[2.5, 4.5], [10.5, 12.5]])
    with pytest.raises(ShapeError):
        F.avg_pool(Tensor(np.zeros((1, 5, 4, 1), np.float32)), 2)


def test_concat_then_slice_recovers_parts(rng):
    a = Tensor(rng.standard_normal((2, 3, 3, 2)).astype(np.float32))
    b = Tensor(rng.standard_normal((2, 3, 3, 3)).astype(np.float32))
    joined = F.channel_concat(a, b)
    assert joined.shape == (2, 3, 3, 5)
    assert_array_equal(F.channel_slice(joined, 2, 5).data, b.data)


def test_softmax_cross_entropy_value_and_gradient():
    logits = Tensor(np.array([[2.0, 0.0], [0.0, 0.0]], dtype=np.float64), requires_grad=True)
    loss, probs = F.softmax_cross_entropy(logits, [0, 1])
    expected = (np.log(1 + np.exp(-2.0)) + np.log(2.0)) / 2
    assert_allclose(loss.item(), expected, rtol=1e-12)
    assert_allclose(probs.sum(axis=1), 1.0)

    loss.backward()
    onehot = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert_allclose(logits.grad, (probs - onehot) / 2, rtol=1e-12)


def test_softmax_cross_entropy_rejects_bad_labels():
    logits = Tensor(np.zeros((2, 3), np.float32))
    with pytest.raises(ConstraintError):
        F.softmax_cross_entropy(logits, [0, 3])
    with pytest.raises(ShapeError):
        F.softmax_cross_entropy(Tensor(np.zeros((2, 1), np.float32)), [0, 0])


# -- graph mechanics -------------------------------------------------------------------

def test_fan_out_gradients_accumulate():
    x = Tensor(np.array([[[[1.0, 2.0]]]]), requires_grad=True)
    y = F.pointwise_sub(F.channel_concat(x, x), F.channel_concat(x, x))
    y.backward(np.ones(y.shape))
    assert_array_equal(x.grad, np.zeros_like(x.data))

    z = F.channel_concat(x, x)
    z.backward(np.ones(z.shape))
    # second backward accumulates on top of the zero gradient
    assert_array_equal(x.grad, np.full_like(x.data, 2.0))


def test_no_grad_skips_graph_recording():
    x = Tensor(np.ones((1, 2, 2, 1)), requires_grad=True)
    with no_grad():
        assert not is_grad_enabled()
        y = F.relu(x)
    assert is_grad_enabled()
    assert not y.requires_grad and y.node is None


def test_backward_needs_scalar_or_seed():
    x = Tensor(np.ones((1, 2, 2, 1)), requires_grad=True)
    with pytest.raises(ShapeError):
        F.relu(x).backward()


def test_glorot_uniform_respects_limit_and_seed():
    shape = (3, 3, 3, 64)
    w = glorot_uniform_init(shape, 0).data
    assert w.dtype == np.float32
    assert np.abs(w).max() <= glorot_limit(shape)
    assert_array_equal(w, glorot_uniform_init(shape, 0).data)
    assert_allclose(glorot_limit(shape), np.sqrt(6.0 / (27 + 576)))
