"""Base enums shared across schemas"""

from enum import Enum


class PreprocessingKind(str, Enum):
    """Front end placed before the classifier"""
    REMNANT = "remnant"
    MEDIAN_RESIDUAL = "median_residual"
    HIGHPASS = "highpass"
    NONE = "none"


class ActivationKind(str, Enum):
    PRELU = "prelu"
    RELU = "relu"
    NONE = "none"


class ClassifierKind(str, Enum):
    REMNET = "remnet"
    TOY = "toy"


class AugmentationKind(str, Enum):
    JPEG = "jpeg"
    RESCALE = "rescale"
    GAMMA = "gamma"
    NONE = "none"


class ClusterOrder(str, Enum):
    """Which end of the quality ranking cluster extraction keeps"""
    TOP = "top"
    BOTTOM = "bottom"


class SplitName(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class BayerPattern(str, Enum):
    RGGB = "RGGB"
    BGGR = "BGGR"
    GRBG = "GRBG"
    GBRG = "GBRG"


class DemosaicKernel(str, Enum):
    BILINEAR = "bilinear"
    SMOOTH = "smooth"
    BOX = "box"


class NoiseShape(str, Enum):
    """Spectral emphasis of the simulated sensor noise"""
    LOW = "low"
    MID = "mid"
    HIGH = "high"
