"""Services module"""

# Import services from their own modules; this package loads neither
# matplotlib nor scikit-learn.

__all__ = [
    "augmentation_service",
    "cluster_service",
    "experiment_service",
    "inference_service",
    "manifest_service",
    "metrics_service",
    "split_service",
    "synth_service",
    "training_service",
]
