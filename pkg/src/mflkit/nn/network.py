"""Fixed layer-sequence network: forward, backward, and parameter table."""

from __future__ import annotations

import numpy as np

from .layers import Layer, Parameter


class Network:
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray | None:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if grad is None:  # first layer opted out of its input gradient
                break
        return grad

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters() if p.trainable]

    def state_items(self) -> list[tuple[str, Parameter]]:
        """Stable (name, parameter) pairs covering weights and buffers."""
        items = []
        for i, layer in enumerate(self.layers):
            for p in layer.parameters():
                items.append((f"{i}.{type(layer).__name__}.{p.name}", p))
        return items

    def load_state(self, blobs: dict[str, np.ndarray]) -> None:
        for name, p in self.state_items():
            if name not in blobs:
                raise ValueError(f"checkpoint is missing parameter {name}")
            if blobs[name].shape != p.value.shape:
                raise ValueError(
                    f"shape mismatch for {name}: checkpoint {blobs[name].shape}, "
                    f"model {p.value.shape}"
                )
            p.value = blobs[name].copy()

    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.parameters())
