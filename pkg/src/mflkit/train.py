"""Training loop, evaluation, and prediction.

Each epoch shuffles the training split with a seed derived from
(config seed, epoch), keeps the trailing short batch, takes one Adam step
per batch, and steps the plateau scheduler once per optimizer step on the
validation loss evaluated at the previous epoch end (held constant between
evaluations; no scheduler steps happen before the first evaluation exists).

Before each validation pass the batch-norm running statistics are refreshed
with the current weights (forward passes over training batches with dropout
off, per-batch statistics averaged). At desk scale an epoch is only a few
dozen optimizer steps, so the training-time moving average lags the weight
updates badly enough to wreck eval-mode predictions; the refresh pins the
statistics to the weights actually being evaluated. Reference-scale runs
with hundreds of steps per epoch are barely affected.

For ``num_classes == 2`` the three-way labels collapse to
healthy (0) vs defect-or-weld (1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .metrics import ConfusionMatrix
from .models import Architecture, build
from .nn import Adam, PlateauScheduler, bce_loss, cross_entropy_loss
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import BatchNorm2d, Dropout
from .scan import Label, LabeledDataset, Split, WindowImage

STAT_REFRESH_BATCHES = 20


@dataclass(frozen=True)
class TrainConfig:
    arch: str = "cnn5"
    num_classes: int = 3
    batch_size: int = 64
    epochs: int = 12
    lr: float = 0.001
    dropout: float = 0.33
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    scheduler_factor: float = 0.5
    scheduler_threshold: float = 0.0001
    scheduler_patience: int = 484
    scheduler_min_lr: float = 0.0001
    preprocess: dict | None = None  # provenance descriptor, carried into history

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.num_classes not in (2, 3):
            raise ConfigError("num_classes must be 2 or 3")

    @staticmethod
    def from_dict(data: dict) -> "TrainConfig":
        try:
            return TrainConfig(**data)
        except TypeError as exc:
            raise ConfigError(f"bad train config: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainRun:
    config: TrainConfig
    architecture: Architecture
    history: list[dict] = field(default_factory=list)
    checkpoint_path: Path | None = None
    _state: dict = field(default_factory=dict, repr=False)

    @property
    def final_recalls(self) -> list[float]:
        return self.history[-1]["recalls"] if self.history else []


def _as_arrays(
    images: Sequence[WindowImage], num_classes: int
) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([im.pixels for im in images])[:, None, :, :]
    labels = np.array([int(im.label) for im in images], dtype=np.int64)
    if num_classes == 2:
        labels = (labels != int(Label.HEALTHY)).astype(np.int64)
    return x, labels


def _batch_loss(arch: Architecture, out: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    if arch.num_classes == 2:
        return bce_loss(out, y)
    return cross_entropy_loss(out, y)


def evaluate(
    arch: Architecture, images: Sequence[WindowImage], batch_size: int = 64
) -> tuple[float, ConfusionMatrix]:
    """Eval-mode loss and confusion matrix over a window set."""
    if not images:
        raise DataError("cannot evaluate an empty split")
    x, y = _as_arrays(images, arch.num_classes)
    losses, weights, preds = [], [], []
    for lo in range(0, len(images), batch_size):
        xb, yb = x[lo : lo + batch_size], y[lo : lo + batch_size]
        out = arch.network.forward(xb, train=False)
        loss, _ = _batch_loss(arch, out, yb)
        losses.append(loss)
        weights.append(len(yb))
        preds.append(_decide(arch, out))
    loss = float(np.average(losses, weights=weights))
    cm = ConfusionMatrix.from_predictions(y, np.concatenate(preds), arch.num_classes)
    return loss, cm


def _decide(arch: Architecture, out: np.ndarray) -> np.ndarray:
    if arch.num_classes == 2:
        return (out.reshape(-1) >= 0.5).astype(np.int64)
    return np.argmax(out, axis=1)


def predict(
    arch: Architecture, images: Sequence[WindowImage], batch_size: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """(labels, per-class scores) in eval mode; 0.5 threshold / argmax."""
    x, _ = _as_arrays(images, arch.num_classes)
    labels, scores = [], []
    for lo in range(0, len(images), batch_size):
        out = arch.network.forward(x[lo : lo + batch_size], train=False)
        labels.append(_decide(arch, out))
        if arch.num_classes == 2:
            p = out.reshape(-1)
            scores.append(np.stack([1.0 - p, p], axis=1))
        else:
            shifted = out - out.max(axis=1, keepdims=True)
            ex = np.exp(shifted)
            scores.append(ex / ex.sum(axis=1, keepdims=True))
    return np.concatenate(labels), np.concatenate(scores)


def _check_classes(labels: np.ndarray, num_classes: int, split_name: str) -> None:
    present = set(np.unique(labels).tolist())
    missing = set(range(num_classes)) - present
    if missing:
        raise DataError(f"classes {sorted(missing)} absent from the {split_name} split")


def refresh_batchnorm_stats(
    network,
    x_train: np.ndarray,
    batch_size: int,
    seed_key: list[int],
    max_batches: int = STAT_REFRESH_BATCHES,
) -> None:
    """Recompute BN running statistics under the current weights.

    Averages per-batch statistics over up to `max_batches` seeded training
    batches, with dropout disabled so the statistics match what eval-mode
    forwards will see. No-op for architectures without batch norm.
    """
    bns = [l for l in network.layers if isinstance(l, BatchNorm2d)]
    if not bns:
        return
    dropouts = [l for l in network.layers if isinstance(l, Dropout)]
    saved_rates = [d.rate for d in dropouts]
    saved_momenta = [b.momentum for b in bns]
    for d in dropouts:
        d.rate = 0.0
    for b in bns:
        b.momentum = 1.0  # running := current batch statistics
    sums = [
        (np.zeros_like(b.running_mean.value), np.zeros_like(b.running_var.value))
        for b in bns
    ]
    order = np.random.default_rng(seed_key).permutation(x_train.shape[0])
    count = 0
    for lo in range(0, x_train.shape[0], batch_size):
        idx = order[lo : lo + batch_size]
        if len(idx) < 2:
            continue
        network.forward(x_train[idx], train=True)
        for (mean_sum, var_sum), b in zip(sums, bns):
            mean_sum += b.running_mean.value
            var_sum += b.running_var.value
        count += 1
        if count >= max_batches:
            break
    if count:
        for (mean_sum, var_sum), b in zip(sums, bns):
            b.running_mean.value = mean_sum / count
            b.running_var.value = var_sum / count
    for d, rate in zip(dropouts, saved_rates):
        d.rate = rate
    for b, momentum in zip(bns, saved_momenta):
        b.momentum = momentum


def train(
    dataset: LabeledDataset,
    config: TrainConfig,
    checkpoint_path: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainRun:
    """Run the full training protocol and return the populated history."""
    train_images = dataset.subset(Split.TRAIN)
    val_images = dataset.subset(Split.VALIDATION)
    if not train_images or not val_images:
        raise DataError("both train and validation splits must be nonempty")

    x_train, y_train = _as_arrays(train_images, config.num_classes)
    _check_classes(y_train, config.num_classes, "train")

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state["arch_id"] != config.arch or state["num_classes"] != config.num_classes:
            raise DataError(
                f"checkpoint is for {state['arch_id']}/{state['num_classes']} classes, "
                f"config wants {config.arch}/{config.num_classes}"
            )
        arch = build(config.arch, config.num_classes, seed=config.seed, dropout=config.dropout)
        arch.network.load_state(state["values"])
        adam = _make_adam(arch, config)
        _restore_adam(adam, arch, state)
        scheduler = state["scheduler"]
        held_metric = state["held_metric"]
        epochs_done = state["epochs_done"]
        dropout_rng = np.random.default_rng()
        dropout_rng.bit_generator.state = state["rng_state"]
    else:
        arch = build(config.arch, config.num_classes, seed=config.seed, dropout=config.dropout)
        adam = _make_adam(arch, config)
        scheduler = PlateauScheduler(
            lr=config.lr,
            factor=config.scheduler_factor,
            min_lr=config.scheduler_min_lr,
            threshold=config.scheduler_threshold,
            patience=config.scheduler_patience,
        )
        held_metric = None
        epochs_done = 0
        dropout_rng = np.random.default_rng([config.seed, 202])

    run = TrainRun(config=config, architecture=arch)
    n = len(train_images)
    for epoch in range(epochs_done, config.epochs):
        order = np.random.default_rng([config.seed, 101, epoch]).permutation(n)
        epoch_losses, epoch_weights = [], []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            if held_metric is not None:
                adam.lr = scheduler.step(held_metric)
            out = arch.network.forward(x_train[idx], train=True, rng=dropout_rng)
            loss, grad = _batch_loss(arch, out, y_train[idx])
            arch.network.backward(grad)
            adam.step()
            epoch_losses.append(loss)
            epoch_weights.append(len(idx))
        refresh_batchnorm_stats(
            arch.network, x_train, config.batch_size, [config.seed, 303, epoch]
        )
        val_loss, cm = evaluate(arch, val_images, config.batch_size)
        held_metric = val_loss
        run.history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.average(epoch_losses, weights=epoch_weights)),
                "val_loss": val_loss,
                "recalls": cm.recalls(),
                "lr": scheduler.lr,
            }
        )

    run._state = {
        "adam": adam,
        "scheduler": scheduler,
        "held_metric": held_metric,
        "rng_state": dropout_rng.bit_generator.state,
        "epochs_done": config.epochs,
    }
    if checkpoint_path is not None:
        save_run_checkpoint(run, checkpoint_path)
    return run


def _make_adam(arch: Architecture, config: TrainConfig) -> Adam:
    return Adam(
        arch.network.parameters(),
        lr=config.lr,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )


def _restore_adam(adam: Adam, arch: Architecture, state: dict) -> None:
    adam.t = state["adam"]["t"]
    by_name = dict(arch.network.state_items())
    index = {id(p): i for i, p in enumerate(adam.params)}
    for name, m in state["adam"]["m"].items():
        i = index[id(by_name[name])]
        adam.m[i] = m.copy()
        adam.v[i] = state["adam"]["v"][name].copy()


def save_run_checkpoint(run: TrainRun, path: str | Path) -> None:
    state = run._state
    save_checkpoint(
        path,
        arch_id=run.config.arch,
        num_classes=run.config.num_classes,
        config=run.config.to_dict(),
        network=run.architecture.network,
        adam=state["adam"],
        scheduler=state["scheduler"],
        held_metric=state["held_metric"],
        epochs_done=state["epochs_done"],
        rng_state=state["rng_state"],
    )
    run.checkpoint_path = Path(path)


def load_architecture(path: str | Path) -> tuple[Architecture, TrainConfig]:
    """Rebuild a trained architecture from a checkpoint."""
    try:
        state = load_checkpoint(path)
    except (ValueError, struct.error, KeyError) as exc:
        raise DataError(f"{path}: unreadable checkpoint: {exc}") from exc
    config = TrainConfig.from_dict(state["config"])
    arch = build(config.arch, config.num_classes, seed=config.seed, dropout=config.dropout)
    try:
        arch.network.load_state(state["values"])
    except ValueError as exc:
        raise DataError(f"{path}: checkpoint does not match its architecture: {exc}") from exc
    return arch, config


def write_history(history: list[dict], path: str | Path) -> None:
    """History as JSON lines: epoch, train_loss, val_loss, recalls, lr."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
