"""Hybrid Euclidean/SPD-manifold graph network for time-series forecasting."""

from .model import HSMGNN, ModelConfig, VARIANTS, ablate
from .tensor import Tensor
from .training import MetricsReport, TrainConfig, evaluate, sweep, train

__all__ = [
    "HSMGNN",
    "MetricsReport",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "VARIANTS",
    "ablate",
    "evaluate",
    "sweep",
    "train",
]
