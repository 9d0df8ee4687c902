"""Self-contained tensor/layer engine with exact-gradient backpropagation."""

from .layers import (
    BatchNorm2d,
    Conv2d,
    Dropout,
    Flatten,
    Linear,
    LocalResponseNorm,
    MaxPool2d,
    Parameter,
    ReLU,
    Sigmoid,
    Softmax,
)
from .losses import bce_loss, cross_entropy_loss
from .network import Network
from .optim import Adam, PlateauScheduler
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "BatchNorm2d",
    "Conv2d",
    "Dropout",
    "Flatten",
    "Linear",
    "LocalResponseNorm",
    "MaxPool2d",
    "Network",
    "Parameter",
    "PlateauScheduler",
    "ReLU",
    "Sigmoid",
    "Softmax",
    "bce_loss",
    "cross_entropy_loss",
    "load_checkpoint",
    "save_checkpoint",
]
