"""Classifier architectures over 64x64 single-channel windows.

* ``cnn5``: five conv blocks (5x5 kernels, pad 2), each conv followed by
  batch normalization, ReLU, and dropout; 2x2/2 max pooling after blocks
  1-4 takes the 64x64 input down to 4x4; channels 1-16-32-64-64-64; one
  linear layer feeds the output head.
* ``cnn5_lrn``: cnn5 with local response normalization in place of BN.
* ``cnn2``: two conv+pool blocks and a 128-unit hidden linear layer. This is
  a reconstruction of an externally described net and is flagged approximate.
* ``raynet``: three 3x3 conv+pool blocks and two linear layers; likewise a
  flagged reconstruction.

Binary heads end in a single sigmoid unit; multiclass heads emit raw logits
for the cross-entropy loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import (
    BatchNorm2d,
    Conv2d,
    Dropout,
    Flatten,
    Linear,
    LocalResponseNorm,
    MaxPool2d,
    Network,
    ReLU,
    Sigmoid,
)

ARCHITECTURE_IDS = ("cnn5", "cnn5_lrn", "cnn2", "raynet")
INPUT_SHAPE = (1, 64, 64)

_LRN_PARAMS = dict(size=5, alpha=1e-4, beta=0.75, k=2.0)


@dataclass
class Architecture:
    id: str
    num_classes: int
    network: Network
    approximate: bool = False

    @property
    def display_name(self) -> str:
        base = {
            "cnn5": "CNN-5",
            "cnn5_lrn": "CNN-5+LRN",
            "cnn2": "CNN-2",
            "raynet": "RayNet",
        }[self.id]
        return base + (" (reconstruction)" if self.approximate else "")

    @property
    def output_dim(self) -> int:
        return 1 if self.num_classes == 2 else self.num_classes

    def summary(self) -> list[dict]:
        """Per-layer output shapes and parameter counts from a probe forward."""
        x = np.zeros((1, *INPUT_SHAPE))
        rows = []
        for layer in self.network.layers:
            x = layer.forward(x, train=False)
            rows.append(
                {
                    "layer": type(layer).__name__,
                    "output_shape": tuple(x.shape[1:]),
                    "parameters": sum(p.value.size for p in layer.parameters() if p.trainable),
                }
            )
        return rows


def build(
    arch_id: str,
    num_classes: int,
    seed: int = 0,
    dropout: float = 0.33,
) -> Architecture:
    """Construct an architecture with seeded fan-in-scaled uniform init."""
    if num_classes not in (2, 3):
        raise ConfigError("num_classes must be 2 or 3")
    if arch_id not in ARCHITECTURE_IDS:
        raise ConfigError(f"unknown architecture {arch_id!r}; choose from {ARCHITECTURE_IDS}")
    rng = np.random.default_rng([seed, 9001])
    out_dim = 1 if num_classes == 2 else num_classes
    binary = num_classes == 2

    if arch_id in ("cnn5", "cnn5_lrn"):
        channels = (1, 16, 32, 64, 64, 64)
        layers = []
        for i in range(5):
            layers.append(
                Conv2d(channels[i], channels[i + 1], 5, padding=2, rng=rng, needs_input_grad=i > 0)
            )
            if arch_id == "cnn5":
                layers.append(BatchNorm2d(channels[i + 1]))
            else:
                layers.append(LocalResponseNorm(**_LRN_PARAMS))
            layers.append(ReLU())
            layers.append(Dropout(dropout))
            if i < 4:
                layers.append(MaxPool2d())
        layers.append(Flatten())
        layers.append(Linear(channels[-1] * 4 * 4, out_dim, rng=rng))
        approximate = False
    elif arch_id == "cnn2":
        layers = [
            Conv2d(1, 32, 5, padding=2, rng=rng, needs_input_grad=False),
            ReLU(),
            MaxPool2d(),
            Conv2d(32, 64, 5, padding=2, rng=rng),
            ReLU(),
            MaxPool2d(),
            Flatten(),
            Linear(64 * 16 * 16, 128, rng=rng),
            ReLU(),
            Linear(128, out_dim, rng=rng),
        ]
        approximate = True
    else:  # raynet
        layers = []
        channels = (1, 16, 32, 64)
        for i in range(3):
            layers.append(
                Conv2d(channels[i], channels[i + 1], 3, padding=1, rng=rng, needs_input_grad=i > 0)
            )
            layers.append(ReLU())
            layers.append(MaxPool2d())
        layers.append(Flatten())
        layers.append(Linear(64 * 8 * 8, 256, rng=rng))
        layers.append(ReLU())
        layers.append(Linear(256, out_dim, rng=rng))
        approximate = True

    if binary:
        layers.append(Sigmoid())
    return Architecture(id=arch_id, num_classes=num_classes, network=Network(layers), approximate=approximate)
