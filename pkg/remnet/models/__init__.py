"""Data models and schemas"""

from remnet.models.base import (
    ActivationKind,
    AugmentationKind,
    BayerPattern,
    ClassifierKind,
    ClusterOrder,
    DemosaicKernel,
    NoiseShape,
    PreprocessingKind,
    SplitName,
)
from remnet.models.architecture import (
    ArchitectureDescriptor,
    ClassifierConfig,
    ConvLayerSpec,
    RemnantBlockConfig,
)
from remnet.models.dataset import (
    AugmentationSpec,
    ClusterRecord,
    ClusterSelection,
    ImageRecord,
    QualityConstants,
    SplitResult,
    manipulation_sets,
    training_augmentations,
)
from remnet.models.synth import (
    CameraModelSpec,
    DatasetDescriptor,
    DeviceSpec,
    SceneGeneratorSpec,
    SynthConfig,
)
from remnet.models.training import (
    CheckpointMeta,
    EvalMetrics,
    HistoryRecord,
    PredictionRecord,
    TrainConfig,
    TrainResult,
)
from remnet.models.run import DataConfig, EvalConfig, RunConfig
from remnet.models.experiment import ExperimentReport, SeedOutcome

__all__ = [
    # Base
    "ActivationKind",
    "AugmentationKind",
    "BayerPattern",
    "ClassifierKind",
    "ClusterOrder",
    "DemosaicKernel",
    "NoiseShape",
    "PreprocessingKind",
    "SplitName",
    # Architecture
    "ArchitectureDescriptor",
    "ClassifierConfig",
    "ConvLayerSpec",
    "RemnantBlockConfig",
    # Dataset
    "AugmentationSpec",
    "ClusterRecord",
    "ClusterSelection",
    "ImageRecord",
    "QualityConstants",
    "SplitResult",
    "manipulation_sets",
    "training_augmentations",
    # Synth
    "CameraModelSpec",
    "DatasetDescriptor",
    "DeviceSpec",
    "SceneGeneratorSpec",
    "SynthConfig",
    # Training
    "CheckpointMeta",
    "EvalMetrics",
    "HistoryRecord",
    "PredictionRecord",
    "TrainConfig",
    "TrainResult",
    # Run
    "DataConfig",
    "EvalConfig",
    "RunConfig",
    # Experiment
    "ExperimentReport",
    "SeedOutcome",
]
