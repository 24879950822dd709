"""Operator learning with function-valued RKHS networks."""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, model_from_checkpoint, save_checkpoint
from .data import OperatorDataset, generate_dataset, load_dataset, save_dataset, split_dataset
from .deeponet import DeepONet, DeepONetConfig
from .errors import (ConfigurationError, DimensionError, DomainError, FormatError, FvrkhsError,
                     KindMismatchError, NumericalError, UsageError)
from .grid import GridFunction
from .model import ModelConfig, RKHSOperatorModel
from .train import TrainConfig, build_model, train, train_poisson

__all__ = [
    "Checkpoint", "ConfigurationError", "DeepONet", "DeepONetConfig", "DimensionError",
    "DomainError", "FormatError", "FvrkhsError", "GridFunction", "KindMismatchError",
    "ModelConfig", "NumericalError", "OperatorDataset", "RKHSOperatorModel", "TrainConfig",
    "UsageError", "build_model", "generate_dataset", "load_checkpoint", "load_dataset",
    "model_from_checkpoint", "save_checkpoint", "save_dataset", "split_dataset", "train",
    "train_poisson",
]
