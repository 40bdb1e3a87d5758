import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from remnet.autodiff import functional as F
from remnet.autodiff.tensor import Tensor, no_grad
from remnet.models.architecture import ArchitectureDescriptor, ClassifierConfig, RemnantBlockConfig
from remnet.networks.cascade import build_model, cascade, parameter_count, shape_trace
from remnet.networks.classifier import ClassificationBlock, ToyClassifier
from remnet.networks.remnant import RemnantBlock
from remnet.services.training_service import training_service
from remnet.utils.exceptions import ShapeError


@pytest.fixture(scope="module")
def canonical():
    return build_model(ArchitectureDescriptor(), seed=0)


def test_canonical_parameter_count(canonical):
    assert parameter_count(canonical) == 1_859_890
    block_counts = [parameter_count(b) for b in canonical.remnant]
    assert block_counts == [42_528, 158_688, 612_192]
    assert parameter_count(canonical.classifier) == 1_046_482


def test_canonical_layer_shapes(canonical):
    trace = shape_trace(canonical, batch=1)
    assert trace == [
        ("input", (1, 64, 64, 3)),
        ("remnant", (1, 64, 64, 3)),
        ("remnant", (1, 64, 64, 3)),
        ("remnant", (1, 64, 64, 3)),
        ("conv_bn_act", (1, 32, 32, 64)),
        ("conv_bn_act", (1, 16, 16, 128)),
        ("conv_bn_act", (1, 8, 8, 256)),
        ("conv_bn_act", (1, 4, 4, 512)),
        ("avg_pool", (1, 1, 1, 512)),
        ("conv", (1, 1, 1, 18)),
    ]


def test_shape_trace_leaves_running_stats_untouched(canonical):
    before = {k: v.copy() for k, v in canonical.named_buffers()}
    shape_trace(canonical)
    for name, value in canonical.named_buffers():
        assert_array_equal(value, before[name], err_msg=name)


def test_probabilities_sum_to_one(rng):
    descriptor = ArchitectureDescriptor(remnant_filters=[4], classifier_layers=[
        {"filters": 4, "kernel": 7, "stride": 2}, {"filters": 4, "kernel": 5, "stride": 2},
        {"filters": 4, "kernel": 3, "stride": 2}, {"filters": 4, "kernel": 2, "stride": 2},
    ], n_class=5)
    model = build_model(descriptor, seed=0)
    probs = model.probabilities(Tensor(rng.uniform(0, 1, (3, 64, 64, 3)).astype(np.float32)))
    assert probs.shape == (3, 5)
    assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_same_seed_gives_same_weights(toy_descriptor):
    a, b = build_model(toy_descriptor, 5), build_model(toy_descriptor, 5)
    c = build_model(toy_descriptor, 6)
    assert all(np.array_equal(p.data, q.data) for p, q in zip(a.parameters(), b.parameters()))
    assert not all(np.array_equal(p.data, q.data) for p, q in zip(a.parameters(), c.parameters()))


# -- remnant blocks --------------------------------------------------------------

def _warmed_block(rng, filters=8):
    block = RemnantBlock(RemnantBlockConfig(widen_filters=filters), rng)
    with no_grad():
        block(Tensor(rng.uniform(0, 1, (4, 16, 16, 3)).astype(np.float32)))
    return block.eval()


def test_remnant_block_is_affine_in_inference_mode(rng):
    block = _warmed_block(rng)
    for _ in range(3):
        x = rng.uniform(0, 1, (2, 16, 16, 3)).astype(np.float32)
        y = rng.uniform(0, 1, (2, 16, 16, 3)).astype(np.float32)
        a = float(rng.uniform(-1, 2))
        with no_grad():
            mixed = block(Tensor(a * x + (1 - a) * y)).data
            fx, fy = block(Tensor(x)).data, block(Tensor(y)).data
        assert_allclose(mixed, a * fx + (1 - a) * fy, atol=1e-4)


def test_remnant_block_with_zero_convolutions_returns_normalized_input(rng):
    block = RemnantBlock(RemnantBlockConfig(widen_filters=4), rng)
    for conv in (block.conv1, block.conv2, block.conv3):
        conv.weight.data[...] = 0
        conv.bias.data[...] = 0
    x = (5 + 3 * rng.standard_normal((3, 8, 8, 3))).astype(np.float32)
    with no_grad():
        out = block(Tensor(x)).data
        expected = F.batch_norm(Tensor(x), block.bn_in.gamma, block.bn_in.beta, F.BatchNormStats(3), True).data
    assert_allclose(out, expected, atol=1e-6)


def test_remnant_block_rejects_wrong_channel_count(rng):
    block = RemnantBlock(RemnantBlockConfig(widen_filters=4), rng)
    with pytest.raises(ShapeError):
        block(Tensor(np.zeros((2, 8, 8, 1), np.float32)))


@pytest.mark.parametrize("count", [2, 4])
def test_remnant_block_config_requires_three_convolutions(count):
    with pytest.raises(ValidationError, match="exactly three convolutions"):
        RemnantBlockConfig(widen_filters=4, conv_count=count)
    assert RemnantBlockConfig(widen_filters=4).conv_count == 3


def test_remnant_activation_flag_adds_prelu(rng):
    plain = RemnantBlock(RemnantBlockConfig(widen_filters=4), rng)
    activated = RemnantBlock(RemnantBlockConfig(widen_filters=4, activation="prelu"), rng)
    assert parameter_count(activated) - parameter_count(plain) == 8


# -- cascades ----------------------------------------------------------------------

def test_cascade_without_blocks_equals_classifier(rng, toy_descriptor):
    model = build_model(toy_descriptor, seed=0)
    x = Tensor(rng.uniform(0, 1, (2, 64, 64, 3)).astype(np.float32))
    with no_grad():
        bare = model.without_preprocessing()(x).data
        direct = model.classifier(x).data
    assert_array_equal(bare, direct)


def test_cascade_checks_block_channels(rng):
    head = ToyClassifier(3, rng)
    odd_block = RemnantBlock(RemnantBlockConfig(widen_filters=4, in_channels=1), rng)
    with pytest.raises(ShapeError):
        cascade([odd_block], head)


def test_classifier_rejects_wrong_input_size(rng):
    head = ClassificationBlock(ClassifierConfig(n_class=3), rng)
    with pytest.raises(ShapeError):
        head(Tensor(np.zeros((2, 32, 32, 3), np.float32)))


def test_one_training_step_updates_front_end(rng, toy_descriptor):
    model = build_model(toy_descriptor, seed=0)
    before = model.remnant[0].conv1.weight.data.copy()
    x = rng.uniform(0, 1, (4, 64, 64, 3)).astype(np.float32)
    training_service.fit_batch(model, x, np.array([0, 1, 0, 1]), steps=1)
    grad = model.remnant[0].conv1.weight.grad
    assert grad is not None and np.abs(grad).sum() > 0
    assert not np.array_equal(before, model.remnant[0].conv1.weight.data)


@pytest.mark.parametrize("preprocessing", ["median_residual", "highpass", "none"])
def test_fixed_front_ends_share_the_classifier(preprocessing, toy_descriptor, rng):
    descriptor = ArchitectureDescriptor.model_validate({**toy_descriptor.model_dump(), "preprocessing": preprocessing})
    model = build_model(descriptor, seed=0)
    assert parameter_count(model) == parameter_count(model.classifier)
    with no_grad():
        logits = model(Tensor(rng.uniform(0, 1, (2, 64, 64, 3)).astype(np.float32)))
    assert logits.shape == (2, 2)


def test_relu_classifier_variant_builds(rng):
    descriptor = ArchitectureDescriptor(preprocessing="none", classifier_activation="relu", n_class=3)
    model = build_model(descriptor, seed=0)
    # no PReLU slopes, and a 3-way instead of 18-way final 1x1 conv
    assert parameter_count(model) == 1_046_482 - (64 + 128 + 256 + 512) - 513 * (18 - 3)
