"""Confusion matrix and recall metrics.

Per-class recall is evaluated one-versus-all; the summary "average" is the
support-weighted mean of per-class recalls, which equals overall accuracy
(trace / total).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64; counts[t][p] = true class t predicted as p

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DataError("confusion matrix must be square")
        if (counts < 0).any():
            raise DataError("confusion counts must be >= 0")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @staticmethod
    def from_predictions(true, predicted, num_classes: int) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.int64)
        predicted = np.asarray(predicted, dtype=np.int64)
        if true.shape != predicted.shape:
            raise DataError("true and predicted label arrays must match")
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (true, predicted), 1)
        return ConfusionMatrix(counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recall(self, k: int) -> float:
        support = int(self.supports[k])
        if support == 0:
            raise DataError(f"class {k} has zero support; recall undefined")
        return float(self.counts[k, k]) / support

    def recalls(self) -> list[float]:
        return [self.recall(k) for k in range(self.num_classes)]

    def average_recall(self) -> float:
        """Support-weighted mean recall == trace / total."""
        total = self.total
        if total == 0:
            raise DataError("empty confusion matrix")
        return float(np.trace(self.counts)) / total


def weighted_average(recalls, supports) -> float:
    """Support-weighted mean of externally supplied per-class recalls."""
    recalls = np.asarray(recalls, dtype=np.float64)
    supports = np.asarray(supports, dtype=np.float64)
    if recalls.shape != supports.shape or recalls.size == 0:
        raise DataError("recalls and supports must be same-length nonempty vectors")
    return float((recalls * supports).sum() / supports.sum())
