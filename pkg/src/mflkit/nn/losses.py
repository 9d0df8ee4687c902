"""Loss functions returning (value, gradient) pairs."""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over probabilities clamped to [eps, 1-eps].

    Returns the scalar loss and its gradient with respect to the (unclamped)
    probabilities, same shape as the input.
    """
    shape = probabilities.shape
    p = np.clip(probabilities.reshape(-1), BCE_EPS, 1.0 - BCE_EPS)
    y = labels.reshape(-1).astype(np.float64)
    n = p.size
    loss = -float(np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    grad = ((p - y) / (p * (1.0 - p)) / n).reshape(shape)
    return loss, grad


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean multiclass cross-entropy on logits via the log-sum-exp form.

    Gradient is (softmax - one_hot) / N.
    """
    n, k = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))
    softmax = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    softmax[np.arange(n), labels] -= 1.0
    return loss, softmax / n
