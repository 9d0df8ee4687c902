"""Binary checkpoint format for training state.

Little-endian layout::

    magic "MFLC" | version u16
    | arch id (u8 length + utf8) | num_classes u8
    | config JSON blob (u32 length + bytes)
    | parameter table: count u32, then per entry
        name (u16 length + utf8) | trainable u8 | ndim u8 | dims u32 each
    | per entry: f64 value blob
    | adam: t u64, beta1 f64, beta2 f64, eps f64,
        then per *trainable* entry: f64 m blob, f64 v blob
    | scheduler: lr, factor, min_lr, threshold f64; patience u64;
        best_metric f64; bad_steps u64
    | held_metric f64 (NaN when no validation metric exists yet)
    | epochs_done u32
    | rng state JSON blob (u32 length + bytes)

Reloading restores every array and the RNG bit-exactly, so single-threaded
training resumes bit-identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .network import Network
from .optim import Adam, PlateauScheduler

_MAGIC = b"MFLC"
_VERSION = 1


def _write_blob(fh, data: bytes) -> None:
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_blob(fh) -> bytes:
    (size,) = struct.unpack("<I", fh.read(4))
    return fh.read(size)


def save_checkpoint(
    path: str | Path,
    arch_id: str,
    num_classes: int,
    config: dict,
    network: Network,
    adam: Adam,
    scheduler: PlateauScheduler,
    held_metric: float | None,
    epochs_done: int,
    rng_state: dict,
) -> None:
    items = network.state_items()
    trainable = {id(p) for p in adam.params}
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        arch_bytes = arch_id.encode("utf-8")
        fh.write(struct.pack("<B", len(arch_bytes)))
        fh.write(arch_bytes)
        fh.write(struct.pack("<B", num_classes))
        _write_blob(fh, json.dumps(config, sort_keys=True).encode("utf-8"))

        fh.write(struct.pack("<I", len(items)))
        for name, p in items:
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<BB", int(p.trainable), p.value.ndim))
            fh.write(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        for _, p in items:
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())

        fh.write(struct.pack("<Qddd", adam.t, adam.beta1, adam.beta2, adam.eps))
        adam_by_id = {id(p): i for i, p in enumerate(adam.params)}
        for _, p in items:
            if id(p) in trainable:
                i = adam_by_id[id(p)]
                fh.write(np.ascontiguousarray(adam.m[i], dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(adam.v[i], dtype="<f8").tobytes())

        fh.write(
            struct.pack(
                "<ddddQdQ",
                scheduler.lr,
                scheduler.factor,
                scheduler.min_lr,
                scheduler.threshold,
                scheduler.patience,
                scheduler.best_metric,
                scheduler.bad_steps,
            )
        )
        fh.write(struct.pack("<d", np.nan if held_metric is None else held_metric))
        fh.write(struct.pack("<I", epochs_done))
        _write_blob(fh, json.dumps(rng_state).encode("utf-8"))


def load_checkpoint(path: str | Path) -> dict:
    """Raw checkpoint contents; the caller rebuilds the architecture around them."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (arch_len,) = struct.unpack("<B", fh.read(1))
        arch_id = fh.read(arch_len).decode("utf-8")
        (num_classes,) = struct.unpack("<B", fh.read(1))
        config = json.loads(_read_blob(fh).decode("utf-8"))

        (count,) = struct.unpack("<I", fh.read(4))
        table = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            trainable, ndim = struct.unpack("<BB", fh.read(2))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            table.append((name, bool(trainable), shape))
        values = {}
        for name, _, shape in table:
            n = int(np.prod(shape)) if shape else 1
            values[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()

        t, beta1, beta2, eps = struct.unpack("<Qddd", fh.read(8 + 24))
        adam_m, adam_v = {}, {}
        for name, trainable, shape in table:
            if trainable:
                n = int(np.prod(shape)) if shape else 1
                adam_m[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()
                adam_v[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()

        lr, factor, min_lr, threshold, patience, best_metric, bad_steps = struct.unpack(
            "<ddddQdQ", fh.read(4 * 8 + 8 + 8 + 8)
        )
        (held_metric,) = struct.unpack("<d", fh.read(8))
        (epochs_done,) = struct.unpack("<I", fh.read(4))
        rng_state = json.loads(_read_blob(fh).decode("utf-8"))

    return {
        "arch_id": arch_id,
        "num_classes": num_classes,
        "config": config,
        "table": table,
        "values": values,
        "adam": {"t": t, "beta1": beta1, "beta2": beta2, "eps": eps, "m": adam_m, "v": adam_v},
        "scheduler": PlateauScheduler(
            lr=lr,
            factor=factor,
            min_lr=min_lr,
            threshold=threshold,
            patience=int(patience),
            best_metric=best_metric,
            bad_steps=int(bad_steps),
        ),
        "held_metric": None if np.isnan(held_metric) else held_metric,
        "epochs_done": epochs_done,
        "rng_state": rng_state,
    }
