"""Figure rendering: window/scan heatmaps, training curves, confusion matrices.

All figures go to files (PNG); window renders are exact 64x64 grayscale
images with the value range min-max mapped to 8 bits.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ConfusionMatrix
from .preprocess import FillingMethod, fill, normalize
from .scan import SensorScan, WindowImage


def save_window_png(image: WindowImage, path: str | Path) -> None:
    """One 64x64 grayscale pixel per cell, min-max mapped to 8-bit."""
    pixels = image.pixels
    lo, hi = float(pixels.min()), float(pixels.max())
    if hi == lo:  # constant window renders mid-gray
        data = np.full_like(pixels, 0.5)
        lo, hi = 0.0, 1.0
    else:
        data = pixels
    plt.imsave(path, data, cmap="gray", vmin=lo, vmax=hi, format="png")


def render_windows(images, out_dir: str | Path, limit: int | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, image in enumerate(images):
        if limit is not None and i >= limit:
            break
        path = out_dir / f"window_{i:05d}_{image.label.name.lower()}.png"
        save_window_png(image, path)
        paths.append(path)
    return paths


def render_scan_strips(
    scan: SensorScan, out_dir: str | Path, strip_samples: int = 2048
) -> list[Path]:
    """Grayscale strips (sensors x samples) covering the whole scan."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, start in enumerate(range(0, scan.samples, strip_samples)):
        segment = scan.values[start : start + strip_samples].astype(np.float64).T
        lo, hi = float(segment.min()), float(segment.max())
        if hi == lo:
            hi = lo + 1.0
        path = out_dir / f"strip_{i:04d}.png"
        plt.imsave(path, segment, cmap="gray", vmin=lo, vmax=hi, format="png")
        paths.append(path)
    return paths


def render_filling_comparison(
    image: WindowImage, out_dir: str | Path, prefix: str = "filling"
) -> list[Path]:
    """One PNG per filling method for the same raw window, plus the raw view."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}_raw.png"]
    save_window_png(image, paths[0])
    for method in FillingMethod:
        processed = normalize(fill(image, method), method)
        path = out_dir / f"{prefix}_method{int(method)}.png"
        save_window_png(processed, path)
        paths.append(path)
    return paths


def plot_history(history: list[dict], path: str | Path) -> None:
    """Train/validation loss curves with the learning-rate trace."""
    epochs = [row["epoch"] for row in history]
    fig, (ax_loss, ax_lr) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_loss.plot(epochs, [row["train_loss"] for row in history], label="train loss")
    ax_loss.plot(epochs, [row["val_loss"] for row in history], label="validation loss")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_loss.grid(alpha=0.3)
    ax_lr.step(epochs, [row["lr"] for row in history], where="post")
    ax_lr.set_xlabel("epoch")
    ax_lr.set_ylabel("learning rate")
    ax_lr.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confusion(cm: ConfusionMatrix, class_names: list[str], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    counts = cm.counts
    ax.imshow(counts, cmap="Blues")
    for t in range(counts.shape[0]):
        for p in range(counts.shape[1]):
            ax.text(p, t, str(counts[t, p]), ha="center", va="center", fontsize=9)
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ablation(rows, path: str | Path) -> None:
    """Bar chart of the weighted-average recall per grid cell."""
    fig, ax = plt.subplots(figsize=(8, 0.6 * max(len(rows), 4) + 1.5))
    labels = [row.method for row in rows]
    values = [100 * row.average for row in rows]
    ax.barh(range(len(rows)), values)
    ax.set_yticks(range(len(rows)), labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("weighted average recall, %")
    ax.set_xlim(0, 100)
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
