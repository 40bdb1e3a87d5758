"""Preprocessing front end cascaded with a classifier, and the model factory"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from remnet.autodiff import functional as F
from remnet.autodiff.tensor import Tensor, no_grad
from remnet.models.architecture import ArchitectureDescriptor
from remnet.models.base import ClassifierKind, PreprocessingKind
from remnet.networks.classifier import ClassificationBlock, ToyClassifier
from remnet.networks.module import Module, Trace, _record
from remnet.networks.remnant import FixedFilterBlock, RemnantBlock
from remnet.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)


class CascadeModel(Module):
    """``classifier(block_M(...block_1(x)))``, trained end to end with one loss"""

    def __init__(self, blocks: Sequence[Module], classifier: Module, descriptor: Optional[ArchitectureDescriptor] = None):
        super().__init__()
        self.remnant: List[Module] = list(blocks)
        self.classifier = classifier
        self.descriptor = descriptor

    @property
    def n_class(self) -> int:
        return self.classifier.n_class

    @property
    def input_shape(self):
        return self.classifier.expected_input_shape

    def forward(self, x: Tensor, trace: Trace = None) -> Tensor:
        """Return class logits (B, n_class)"""
        _record(trace, "input", x)
        for block in self.remnant:
            x = block(x, trace)
        return self.classifier(x, trace)

    def probabilities(self, x: Tensor) -> np.ndarray:
        with no_grad():
            return F.softmax(self.forward(x).data)

    def without_preprocessing(self) -> "CascadeModel":
        """Same classifier, no front end"""
        return CascadeModel([], self.classifier, self.descriptor)


def cascade(blocks: Sequence[Module], classifier: Module, descriptor: Optional[ArchitectureDescriptor] = None) -> CascadeModel:
    """Compose shape-preserving front-end blocks with a classifier.

    The classifier must declare ``expected_input_shape``; every block keeps
    its input shape, so the check happens here, before any data flows.
    """
    expected = getattr(classifier, "expected_input_shape", None)
    if expected is None:
        raise ShapeError(f"{type(classifier).__name__} does not declare expected_input_shape")
    for i, block in enumerate(blocks):
        channels = getattr(block, "in_channels", expected[2])
        if channels != expected[2]:
            raise ShapeError(
                f"preprocessing block {i} works on {channels} channels but the classifier expects {expected[2]}",
                {"block": i, "block_channels": channels, "classifier_input": list(expected)},
            )
    model = CascadeModel(blocks, classifier, descriptor)
    model.name_parameters()
    return model


def build_model(descriptor: ArchitectureDescriptor, seed: int) -> CascadeModel:
    """Instantiate a model from its descriptor; identical seeds give identical weights"""
    rng = np.random.default_rng(seed)
    bn = dict(bn_momentum=descriptor.bn_momentum, bn_eps=descriptor.bn_eps, prelu_init=descriptor.prelu_init)

    blocks: List[Module] = []
    if descriptor.preprocessing == PreprocessingKind.REMNANT:
        blocks = [RemnantBlock(cfg, rng, **bn) for cfg in descriptor.remnant_block_configs()]
    elif descriptor.preprocessing in (PreprocessingKind.MEDIAN_RESIDUAL, PreprocessingKind.HIGHPASS):
        blocks = [FixedFilterBlock(descriptor.preprocessing)]

    if descriptor.classifier == ClassifierKind.TOY:
        classifier = ToyClassifier(
            descriptor.n_class, rng, filters=tuple(descriptor.toy_filters),
            input_size=descriptor.input_size, prelu_init=descriptor.prelu_init,
        )
    else:
        config = descriptor.classifier_config()
        if config.input_size != descriptor.input_size:
            raise ShapeError(
                f"classifier layers reduce {config.input_size}px inputs to one pool window, "
                f"but the descriptor declares input_size {descriptor.input_size}"
            )
        classifier = ClassificationBlock(config, rng, **bn)

    model = cascade(blocks, classifier, descriptor)
    logger.debug(
        f"Built {descriptor.preprocessing.value}+{descriptor.classifier.value} model "
        f"({len(blocks)} front-end blocks, {parameter_count(model)} parameters)"
    )
    return model


def parameter_count(model: Module) -> int:
    return int(sum(p.data.size for p in model.parameters()))


def shape_trace(model: CascadeModel, batch: int = 1) -> List[tuple]:
    """Layer-by-layer output shapes for a zero input (train-mode BN, stats untouched)"""
    h, w, c = model.input_shape
    trace: list = []
    snapshot = {name: np.array(v, copy=True) for name, v in model.named_buffers()}
    was_training = model.training
    model.train()
    with no_grad():
        model(Tensor(np.zeros((max(batch, 2), h, w, c), dtype=np.float32)), trace)
    model.train(was_training)
    model._load_buffers(snapshot, prefix="")
    return [(label, (batch,) + shape[1:]) for label, shape in trace]
