"""Network modules: remnant blocks, classification heads, cascades"""

from remnet.networks.module import BatchNorm2d, Conv2d, Module, PReLU, ReLU
from remnet.networks.remnant import FixedFilterBlock, RemnantBlock
from remnet.networks.classifier import ClassificationBlock, ConvBNAct, ToyClassifier
from remnet.networks.cascade import CascadeModel, build_model, cascade, parameter_count, shape_trace

__all__ = [
    "BatchNorm2d",
    "CascadeModel",
    "ClassificationBlock",
    "Conv2d",
    "ConvBNAct",
    "FixedFilterBlock",
    "Module",
    "PReLU",
    "ReLU",
    "RemnantBlock",
    "ToyClassifier",
    "build_model",
    "cascade",
    "parameter_count",
    "shape_trace",
]
