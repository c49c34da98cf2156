"""Uncertainty-guided crack segmentation: python surface over the C++ core."""

from ungap._core import (
    InvalidConfigError,
    InvalidInputError,
    IoError,
    Model,
    ModelConfig,
    TrainingDivergedError,
    attenuation_ratio,
    augment,
    beta_nll,
    beta_nll_grad,
    boundary_from_mask,
    dice_loss,
    generate_dataset,
    generate_scene,
    micro_metrics,
    sparsification,
    standard_nll,
    train_on_directory,
    uncertainty_noise_correlation,
)

__all__ = [
    "InvalidConfigError",
    "InvalidInputError",
    "IoError",
    "Model",
    "ModelConfig",
    "TrainingDivergedError",
    "attenuation_ratio",
    "augment",
    "beta_nll",
    "beta_nll_grad",
    "boundary_from_mask",
    "dice_loss",
    "generate_dataset",
    "generate_scene",
    "micro_metrics",
    "sparsification",
    "standard_nll",
    "train_on_directory",
    "uncertainty_noise_correlation",
]

__version__ = "0.1.0"
