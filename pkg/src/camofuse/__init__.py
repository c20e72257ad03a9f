"""RGB-D camouflaged object segmentation with depth-weighted
cross-attention fusion: model, losses, evaluation metrics, data pipeline
and a train/evaluate/ablate harness."""

from .config import DataConfig, ModelConfig, OptimConfig, RunConfig
from .decoder import PredictionBundle
from .errors import ConfigError, DataError, NumericError
from .model import CamoFusionNet, build_model

__all__ = [
    "CamoFusionNet",
    "ConfigError",
    "DataConfig",
    "DataError",
    "ModelConfig",
    "NumericError",
    "OptimConfig",
    "PredictionBundle",
    "RunConfig",
    "build_model",
]

__version__ = "0.1.0"
