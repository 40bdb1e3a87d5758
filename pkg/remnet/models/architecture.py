"""Architecture descriptor: the self-describing recipe stored in every checkpoint"""

from typing import List

from pydantic import BaseModel, Field, field_validator, model_validator

from remnet.models.base import ActivationKind, ClassifierKind, PreprocessingKind


class ConvLayerSpec(BaseModel):
    """One strided conv layer of the classification block"""
    filters: int = Field(gt=0)
    kernel: int = Field(gt=0)
    stride: int = Field(gt=0)


DEFAULT_CLASSIFIER_LAYERS = [
    ConvLayerSpec(filters=64, kernel=7, stride=2),
    ConvLayerSpec(filters=128, kernel=5, stride=2),
    ConvLayerSpec(filters=256, kernel=3, stride=2),
    ConvLayerSpec(filters=512, kernel=2, stride=2),
]


class RemnantBlockConfig(BaseModel):
    widen_filters: int = Field(gt=0)
    kernel_size: int = Field(default=3, gt=0)
    conv_count: int = 3
    in_channels: int = Field(default=3, gt=0)
    activation: ActivationKind = ActivationKind.NONE

    @field_validator("conv_count")
    @classmethod
    def _three_convs(cls, value: int) -> int:
        if value != 3:
            raise ValueError(f"a remnant block holds exactly three convolutions, got conv_count={value}")
        return value


class ClassifierConfig(BaseModel):
    layers: List[ConvLayerSpec] = Field(default_factory=lambda: [l.model_copy() for l in DEFAULT_CLASSIFIER_LAYERS])
    pool_window: int = Field(default=4, gt=0)
    n_class: int = Field(default=18, ge=2)
    activation: ActivationKind = ActivationKind.PRELU
    in_channels: int = 3

    @field_validator("layers")
    @classmethod
    def _kernels_decrease(cls, layers: List[ConvLayerSpec]) -> List[ConvLayerSpec]:
        if not layers:
            raise ValueError("classifier needs at least one conv layer")
        kernels = [l.kernel for l in layers]
        if any(b >= a for a, b in zip(kernels, kernels[1:])):
            raise ValueError(f"classifier kernel sizes must strictly decrease, got {kernels}")
        return layers

    @property
    def input_size(self) -> int:
        """Spatial extent that reduces to exactly one pooling window"""
        size = self.pool_window
        for layer in self.layers:
            size *= layer.stride
        return size


class ArchitectureDescriptor(BaseModel):
    """Key-value description of a full model.

    ``remnant_filters`` lists f_i per block, so its length is the block count
    M (an empty list gives the bare classifier).
    """
    preprocessing: PreprocessingKind = PreprocessingKind.REMNANT
    remnant_filters: List[int] = Field(default_factory=lambda: [64, 128, 256])
    remnant_activation: ActivationKind = ActivationKind.NONE
    classifier: ClassifierKind = ClassifierKind.REMNET
    classifier_layers: List[ConvLayerSpec] = Field(
        default_factory=lambda: [l.model_copy() for l in DEFAULT_CLASSIFIER_LAYERS]
    )
    pool_window: int = Field(default=4, gt=0)
    classifier_activation: ActivationKind = ActivationKind.PRELU
    toy_filters: List[int] = Field(default_factory=lambda: [32, 64])
    n_class: int = Field(default=18, ge=2)
    input_size: int = Field(default=64, gt=0)
    bn_momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    bn_eps: float = Field(default=1e-5, gt=0.0)
    prelu_init: float = 0.25

    @field_validator("remnant_filters", "toy_filters")
    @classmethod
    def _positive(cls, values: List[int]) -> List[int]:
        if any(v <= 0 for v in values):
            raise ValueError(f"filter counts must be positive, got {values}")
        return values

    @field_validator("remnant_activation")
    @classmethod
    def _remnant_activation(cls, value: ActivationKind) -> ActivationKind:
        if value not in (ActivationKind.NONE, ActivationKind.PRELU):
            raise ValueError("remnant blocks support activation 'none' or 'prelu'")
        return value

    @field_validator("classifier_activation")
    @classmethod
    def _classifier_activation(cls, value: ActivationKind) -> ActivationKind:
        if value == ActivationKind.NONE:
            raise ValueError("classifier activation must be 'prelu' or 'relu'")
        return value

    @model_validator(mode="after")
    def _toy_shape(self):
        if self.classifier == ClassifierKind.TOY and len(self.toy_filters) != 2:
            raise ValueError("toy classifier takes exactly two filter counts")
        return self

    @property
    def block_count(self) -> int:
        return len(self.remnant_filters) if self.preprocessing == PreprocessingKind.REMNANT else 0

    def remnant_block_configs(self) -> List[RemnantBlockConfig]:
        if self.preprocessing != PreprocessingKind.REMNANT:
            return []
        return [RemnantBlockConfig(widen_filters=f, activation=self.remnant_activation) for f in self.remnant_filters]

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(
            layers=[l.model_copy() for l in self.classifier_layers],
            pool_window=self.pool_window,
            n_class=self.n_class,
            activation=self.classifier_activation,
        )
