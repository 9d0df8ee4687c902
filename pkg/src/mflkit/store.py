"""On-disk window datasets and pipeline manifests.

A dataset directory holds one binary file per window plus ``manifest.json``:

* window file (``.mflw``), little-endian::

    magic "MFLW" | label u8 | mask bitset (512 bytes, row-major, MSB first)
    | 64*64 f64 pixels row-major

* manifest: artifact version, per-stage config hashes, class counts per
  split, and one entry per window (file, split, label, source range).

Manifests carry no timestamps, so identical inputs and configs reproduce
byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError
from .scan import Label, LabeledDataset, Split, WindowImage

_WINDOW_MAGIC = b"MFLW"
_MASK_BYTES = 64 * 64 // 8
_PIXEL_BYTES = 64 * 64 * 8

MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".mflkit.lock"


def config_hash(config: object) -> str:
    """Stable sha256 over the canonical JSON form of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_window(image: WindowImage, path: str | Path) -> None:
    mask_bits = np.packbits(image.abnormal_mask.astype(np.uint8), bitorder="big")
    with open(path, "wb") as fh:
        fh.write(_WINDOW_MAGIC)
        fh.write(struct.pack("<B", int(image.label)))
        fh.write(mask_bits.tobytes())
        fh.write(np.ascontiguousarray(image.pixels, dtype="<f8").tobytes())


def read_window(path: str | Path, source_range: tuple[int, int] = (0, 64)) -> WindowImage:
    raw = Path(path).read_bytes()
    expected = 4 + 1 + _MASK_BYTES + _PIXEL_BYTES
    if len(raw) != expected or raw[:4] != _WINDOW_MAGIC:
        raise DataError(f"{path}: not a window file")
    label = Label(raw[4])
    mask = np.unpackbits(
        np.frombuffer(raw, dtype=np.uint8, count=_MASK_BYTES, offset=5), bitorder="big"
    ).reshape(64, 64).astype(bool)
    pixels = np.frombuffer(raw, dtype="<f8", offset=5 + _MASK_BYTES).reshape(64, 64)
    return WindowImage(pixels=pixels, source_range=source_range, label=label, abnormal_mask=mask)


def save_dataset(
    dataset: LabeledDataset,
    out_dir: str | Path,
    stage_config: dict,
    extra: dict | None = None,
) -> Path:
    """Persist a split dataset; returns the manifest path."""
    out_dir = Path(out_dir)
    windows_dir = out_dir / "windows"
    windows_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (image, tag) in enumerate(zip(dataset.images, dataset.split_tags)):
        name = f"{i:06d}.mflw"
        write_window(image, windows_dir / name)
        entries.append(
            {
                "file": f"windows/{name}",
                "split": tag.value,
                "label": image.label.name.lower(),
                "source_range": list(image.source_range),
            }
        )
    manifest = {
        "artifact_version": _artifact_version(),
        "kind": "window-dataset",
        "config_hash": config_hash(stage_config),
        "config": stage_config,
        "class_counts": dataset.class_counts,
        "windows": entries,
    }
    if extra:
        manifest.update(extra)
    return write_manifest(out_dir, manifest)


def load_dataset(in_dir: str | Path) -> LabeledDataset:
    in_dir = Path(in_dir)
    manifest = read_manifest(in_dir)
    if manifest.get("kind") != "window-dataset":
        raise DataError(f"{in_dir}: manifest does not describe a window dataset")
    images, tags = [], []
    by_name = {lab.name.lower(): lab for lab in Label}
    for entry in manifest["windows"]:
        image = read_window(in_dir / entry["file"], tuple(entry["source_range"]))
        if image.label is not by_name[entry["label"]]:
            raise DataError(f"{entry['file']}: label disagrees with manifest")
        images.append(image)
        tags.append(Split(entry["split"]))
    return LabeledDataset(images=tuple(images), split_tags=tuple(tags))


def write_manifest(out_dir: str | Path, manifest: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return path


def read_manifest(in_dir: str | Path) -> dict:
    path = Path(in_dir) / MANIFEST_NAME
    if not path.exists():
        raise DataError(f"{in_dir}: no {MANIFEST_NAME}")
    return json.loads(path.read_text(encoding="utf-8"))


@contextmanager
def output_lock(out_dir: str | Path):
    """One command per output directory: exclusive lockfile for the duration."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(f"{out_dir} is locked by another command ({LOCK_NAME} exists)")
    try:
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def iter_window_files(in_dir: str | Path) -> Iterable[Path]:
    yield from sorted(Path(in_dir, "windows").glob("*.mflw"))


def _artifact_version() -> str:
    from . import __version__

    return __version__
