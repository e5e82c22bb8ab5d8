"""Single-channel EEG fatigue detection from robust window statistics.

Pipeline: pick the max-variance channel, cut it into overlapping windows,
describe each window by its MCD location and consistency-scaled scatter plus
the classical variance and autocovariance, then classify with bagged CART
trees.
"""
__version__ = "0.1.0"

from .ensemble import BaggedModel, TreeLimits, deserialize, predict, serialize, train_ensemble
from .evaluation import EnsembleConfig, cross_validate
from .features import (
    FeatureVector,
    LabeledDataset,
    WindowingConfig,
    build_labeled_dataset,
    select_max_variance_channel,
)
from .mcd import MCDConfig, RobustEstimate, robust_estimate
from .signal_io import Recording, SynthSpec, generate_synthetic, load_recording_csv

__all__ = [
    "BaggedModel",
    "EnsembleConfig",
    "FeatureVector",
    "LabeledDataset",
    "MCDConfig",
    "Recording",
    "RobustEstimate",
    "SynthSpec",
    "TreeLimits",
    "WindowingConfig",
    "build_labeled_dataset",
    "cross_validate",
    "deserialize",
    "generate_synthetic",
    "load_recording_csv",
    "predict",
    "robust_estimate",
    "select_max_variance_channel",
    "serialize",
    "train_ensemble",
]
