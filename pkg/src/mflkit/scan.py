"""Domain types for sensor scans, annotation reports, and window images.

A scan is a samples x 64 grid of raw sensor counts (one row per axial step,
one column per circumferential sensor). Window images are 64x64 tiles stored
with sensors as image rows and axial offsets as image columns, so a dead
sensor shows up as a horizontal line and a weld as a vertical ridge.

File formats:

* Scan file (``.mfls``), little-endian binary::

    magic "MFLS" | version u16 | samples u64 | columns u16 (=64)
    | axial_step_mm f64 | sensor_pitch_mm f64 | samples*64 u16 row-major

* Report file: UTF-8 JSON array of
  ``{"kind": "weld"|"defect", "coordinate_mm": number, "defected": bool,
  "note": string}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError, ReportFormatError, ScanFormatError

SENSOR_COUNT = 64
RAW_MAX = 4095
DEFAULT_AXIAL_STEP_MM = 3.37
DEFAULT_SENSOR_PITCH_MM = 10.75

_SCAN_MAGIC = b"MFLS"
_SCAN_VERSION = 1
_SCAN_HEADER = struct.Struct("<4sHQHdd")


class Label(IntEnum):
    HEALTHY = 0
    DEFECT = 1
    WELD = 2


class Kind(str, Enum):
    WELD = "weld"
    DEFECT = "defect"


@dataclass(frozen=True)
class SensorScan:
    """One inspection run: raw readings plus physical step metadata."""

    values: np.ndarray  # (samples, 64) uint16, each value in [0, 4095]
    axial_step_mm: float = DEFAULT_AXIAL_STEP_MM
    sensor_pitch_mm: float = DEFAULT_SENSOR_PITCH_MM
    run_id: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.uint16)
        if values.ndim != 2 or values.shape[1] != SENSOR_COUNT:
            raise DataError(
                f"scan grid must have {SENSOR_COUNT} sensor columns, got shape {values.shape}"
            )
        if values.size and values.max() > RAW_MAX:
            row, col = np.unravel_index(int(np.argmax(values > RAW_MAX)), values.shape)
            raise DataError(
                f"scan value {values[row, col]} at row {row}, column {col} exceeds {RAW_MAX}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def samples(self) -> int:
        return self.values.shape[0]

    @property
    def length_mm(self) -> float:
        return self.samples * self.axial_step_mm

    def sample_of_coordinate(self, coordinate_mm: float) -> int:
        """Sample index whose cell [i*step, (i+1)*step) contains the coordinate."""
        return int(np.floor(coordinate_mm / self.axial_step_mm))


@dataclass(frozen=True)
class Annotation:
    kind: Kind
    coordinate_mm: float
    defected: bool = False
    note: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind(self.kind))
        if not np.isfinite(self.coordinate_mm) or self.coordinate_mm < 0:
            raise ReportFormatError(
                f"annotation coordinate must be finite and >= 0, got {self.coordinate_mm}"
            )


@dataclass(frozen=True)
class AnnotationReport:
    """Ordered annotations plus the report-vs-scan origin shift (0 until aligned)."""

    annotations: tuple[Annotation, ...]
    origin_offset_mm: float = 0.0

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.annotations, key=lambda a: a.coordinate_mm))
        object.__setattr__(self, "annotations", ordered)
        if not np.isfinite(self.origin_offset_mm):
            raise ReportFormatError("origin_offset_mm must be finite")

    def of_kind(self, kind: Kind) -> tuple[Annotation, ...]:
        return tuple(a for a in self.annotations if a.kind is kind)

    def shifted(self, offset_mm: float) -> "AnnotationReport":
        """New report with every coordinate shifted by offset_mm (clipped at 0)."""
        shifted = tuple(
            Annotation(a.kind, max(a.coordinate_mm + offset_mm, 0.0), a.defected, a.note)
            for a in self.annotations
        )
        return AnnotationReport(shifted, origin_offset_mm=offset_mm)

    def __len__(self) -> int:
        return len(self.annotations)


@dataclass(frozen=True)
class WindowImage:
    """One 64x64 tile: rows are sensors, columns are axial offsets."""

    pixels: np.ndarray  # (64, 64) float64
    source_range: tuple[int, int]  # [start_sample, end_sample) in the parent scan
    label: Label = Label.HEALTHY
    abnormal_mask: np.ndarray = field(default=None)  # (64, 64) bool, True where raw value was abnormal

    def __post_init__(self) -> None:
        pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if pixels.shape != (SENSOR_COUNT, SENSOR_COUNT):
            raise DataError(f"window pixels must be 64x64, got {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise DataError("window pixels must be finite")
        start, end = self.source_range
        if end - start != SENSOR_COUNT:
            raise DataError(f"source range {self.source_range} must span exactly 64 samples")
        mask = self.abnormal_mask
        mask = np.zeros_like(pixels, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != pixels.shape:
            raise DataError("abnormal mask must match pixel shape")
        pixels.flags.writeable = False
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "abnormal_mask", mask)
        object.__setattr__(self, "label", Label(self.label))
        object.__setattr__(self, "source_range", (int(start), int(end)))

    def replace(self, *, pixels=None, label=None, abnormal_mask=None) -> "WindowImage":
        return WindowImage(
            pixels=self.pixels if pixels is None else pixels,
            source_range=self.source_range,
            label=self.label if label is None else label,
            abnormal_mask=self.abnormal_mask if abnormal_mask is None else abnormal_mask,
        )


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"


@dataclass(frozen=True)
class LabeledDataset:
    """Window images with one split tag each."""

    images: tuple[WindowImage, ...]
    split_tags: tuple[Split, ...]

    def __post_init__(self) -> None:
        if len(self.images) != len(self.split_tags):
            raise DataError("each image needs exactly one split tag")
        object.__setattr__(self, "split_tags", tuple(Split(t) for t in self.split_tags))

    def subset(self, split: Split) -> tuple[WindowImage, ...]:
        return tuple(im for im, tag in zip(self.images, self.split_tags) if tag is split)

    @property
    def class_counts(self) -> dict[str, dict[str, int]]:
        counts = {s.value: {lab.name.lower(): 0 for lab in Label} for s in Split}
        for image, tag in zip(self.images, self.split_tags):
            counts[tag.value][image.label.name.lower()] += 1
        return counts

    def __len__(self) -> int:
        return len(self.images)


def write_scan(scan: SensorScan, path: str | Path) -> None:
    """Write a scan in the binary scan format; read_scan inverts it bit-exactly."""
    path = Path(path)
    header = _SCAN_HEADER.pack(
        _SCAN_MAGIC,
        _SCAN_VERSION,
        scan.samples,
        SENSOR_COUNT,
        scan.axial_step_mm,
        scan.sensor_pitch_mm,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(scan.values, dtype="<u2").tobytes())


def read_scan(path: str | Path) -> SensorScan:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(_SCAN_HEADER.size)
        if len(header) < _SCAN_HEADER.size:
            raise ScanFormatError(f"{path}: truncated header ({len(header)} bytes)")
        magic, version, samples, columns, step, pitch = _SCAN_HEADER.unpack(header)
        if magic != _SCAN_MAGIC:
            raise ScanFormatError(f"{path}: bad magic {magic!r}, expected {_SCAN_MAGIC!r}")
        if version != _SCAN_VERSION:
            raise ScanFormatError(f"{path}: unsupported scan format version {version}")
        if columns != SENSOR_COUNT:
            raise ScanFormatError(
                f"{path}: header declares {columns} sensor columns, expected {SENSOR_COUNT}"
            )
        payload = fh.read(samples * SENSOR_COUNT * 2)
    values = np.frombuffer(payload, dtype="<u2")
    if values.size != samples * SENSOR_COUNT:
        raise ScanFormatError(
            f"{path}: payload truncated at row {values.size // SENSOR_COUNT}"
            f" of {samples}"
        )
    values = values.reshape(samples, SENSOR_COUNT)
    over = values > RAW_MAX
    if over.any():
        row, col = np.unravel_index(int(np.argmax(over)), values.shape)
        raise ScanFormatError(
            f"{path}: value {values[row, col]} at row {row}, column {col} exceeds {RAW_MAX}"
        )
    return SensorScan(values=values, axial_step_mm=step, sensor_pitch_mm=pitch, run_id=path.stem)


def write_report(report: AnnotationReport, path: str | Path) -> None:
    records = [
        {
            "kind": a.kind.value,
            "coordinate_mm": a.coordinate_mm,
            "defected": a.defected,
            "note": a.note,
        }
        for a in report.annotations
    ]
    Path(path).write_text(json.dumps(records, indent=1), encoding="utf-8")


def read_report(path: str | Path) -> AnnotationReport:
    path = Path(path)
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ReportFormatError(f"{path}: report must be a JSON array")
    annotations = []
    for i, rec in enumerate(records):
        try:
            kind = Kind(rec["kind"])
        except (KeyError, ValueError) as exc:
            raise ReportFormatError(f"{path}: entry {i}: unknown kind {rec.get('kind')!r}") from exc
        coordinate = rec.get("coordinate_mm")
        if not isinstance(coordinate, (int, float)) or coordinate < 0:
            raise ReportFormatError(f"{path}: entry {i}: bad coordinate {coordinate!r}")
        annotations.append(
            Annotation(kind, float(coordinate), bool(rec.get("defected", False)), str(rec.get("note", "")))
        )
    return AnnotationReport(tuple(annotations))
