"""Adam with bias correction and the reduce-on-plateau learning-rate scheduler."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameter


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


@dataclass
class PlateauScheduler:
    """Multiply lr by `factor` after `patience` steps without relative improvement.

    A metric improves when it drops below best * (1 - threshold); lower is
    better. Decays clamp at min_lr.
    """

    lr: float = 0.001
    factor: float = 0.5
    min_lr: float = 0.0001
    threshold: float = 0.0001
    patience: int = 484
    best_metric: float = field(default=np.inf)
    bad_steps: int = 0

    def step(self, metric: float) -> float:
        if not np.isfinite(metric):
            raise ValueError("scheduler metric must be finite")
        if metric < self.best_metric * (1.0 - self.threshold):
            self.best_metric = metric
            self.bad_steps = 0
        else:
            self.bad_steps += 1
            if self.bad_steps > self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_steps = 0
        return self.lr
