"""Preprocessing chain: abnormality masking, report alignment, windowing,
centering, labeling, gap filling, normalization, and the train/validation split.

Raw readings below the abnormality threshold (default 2000 counts, strict
less-than) are treated as sensor malfunctions. Five filling methods replace
them; window images are then min-max normalized either per image or with
dataset-wide bounds.

Window images are oriented sensors x axial (see scan.WindowImage), so:

* filling method 3 averages the same sensor's normal cells across the
  window's axial extent (the image row);
* methods 4 and 5 work across adjacent sensors at a fixed axial position
  (down the image column), which is where the informative neighbors of a
  malfunctioning sensor live.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import AlignmentError, ConfigError, DataError
from .scan import (
    DEFAULT_AXIAL_STEP_MM,
    SENSOR_COUNT,
    AnnotationReport,
    Kind,
    Label,
    LabeledDataset,
    SensorScan,
    Split,
    WindowImage,
)

DEFAULT_ABNORMAL_THRESHOLD = 2000.0
WINDOW_SIZE = 64
HALF_WINDOW = WINDOW_SIZE // 2

# alignment tuning
PEAK_MATCH_TOLERANCE = 5  # samples; a weld "matches" a peak within this distance
DEFAULT_OFFSET_SEARCH = 300  # samples searched on each side of zero shift


class FillingMethod(IntEnum):
    Zero = 1
    ImageMean = 2
    ColumnMean = 3
    NeighborMean = 4
    ColumnInterp = 5


class ScopeVariant(str, Enum):
    PER_IMAGE = "image"
    WHOLE_DATASET = "whole"


@dataclass(frozen=True)
class NormalizationScope:
    variant: ScopeVariant = ScopeVariant.PER_IMAGE
    whole_dataset_min: float | None = None
    whole_dataset_max: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", ScopeVariant(self.variant))
        if self.variant is ScopeVariant.WHOLE_DATASET:
            if self.whole_dataset_min is None or self.whole_dataset_max is None:
                raise ConfigError("whole-dataset scope needs populated min/max")
            if not self.whole_dataset_min < self.whole_dataset_max:
                raise ConfigError("whole-dataset scope needs min < max")


PER_IMAGE = NormalizationScope(ScopeVariant.PER_IMAGE)


@dataclass(frozen=True)
class PreprocessConfig:
    abnormal_threshold: float = DEFAULT_ABNORMAL_THRESHOLD
    window_size: int = WINDOW_SIZE
    filling: FillingMethod = FillingMethod.Zero
    scope: ScopeVariant = ScopeVariant.PER_IMAGE
    centering: bool = False
    center_search_radius: int = 32

    def __post_init__(self) -> None:
        if self.window_size != WINDOW_SIZE:
            raise ConfigError(f"window_size must be {WINDOW_SIZE}")
        if not 0 < self.abnormal_threshold < 4095:
            raise ConfigError("abnormal_threshold must lie in (0, 4095)")
        if self.center_search_radius < 0:
            raise ConfigError("center_search_radius must be >= 0")
        object.__setattr__(self, "filling", FillingMethod(self.filling))
        object.__setattr__(self, "scope", ScopeVariant(self.scope))

    @staticmethod
    def from_dict(data: dict) -> "PreprocessConfig":
        try:
            return PreprocessConfig(**data)
        except TypeError as exc:
            raise ConfigError(f"bad preprocess config: {exc}") from exc


def mark_abnormal(scan: SensorScan, threshold: float = DEFAULT_ABNORMAL_THRESHOLD) -> np.ndarray:
    """Boolean (samples, 64) grid, True where the raw value is below threshold."""
    if not 0 < threshold < 4095:
        raise ConfigError("threshold must lie in (0, 4095)")
    return scan.values < threshold


def _sensor_mean(scan: SensorScan) -> np.ndarray:
    return scan.values.mean(axis=1)


DETREND_SMOOTHING_SAMPLES = 30.0


def _detrended_mean(scan: SensorScan) -> np.ndarray:
    """Cross-sensor mean with the slow background wander subtracted.

    Welds are a few samples wide, far below the smoothing scale, so they pass
    through untouched while baseline drift cancels; a drift-free scan comes
    out unchanged up to a constant.
    """
    mean = _sensor_mean(scan)
    if mean.size < 16:
        return mean - (np.median(mean) if mean.size else 0.0)
    return mean - gaussian_filter1d(mean, DETREND_SMOOTHING_SAMPLES)


def _signal_peaks(mean: np.ndarray) -> np.ndarray:
    """Indices of prominent local maxima of the (detrended) mean signal.

    A peak must strictly exceed its left neighbor, be >= its right neighbor,
    and rise above the noise floor (median + 6 * robust sigma) so that plain
    sensor noise does not anchor the alignment.
    """
    if mean.size < 3:
        return np.empty(0, dtype=np.int64)
    median = np.median(mean)
    sigma = 1.4826 * np.median(np.abs(mean - median))
    floor = median + 6.0 * sigma
    interior = np.arange(1, mean.size - 1)
    is_peak = (
        (mean[interior] > mean[interior - 1])
        & (mean[interior] >= mean[interior + 1])
        & (mean[interior] >= floor)
        & (mean[interior] > median)
    )
    return interior[is_peak]


def align_report(
    scan: SensorScan,
    report: AnnotationReport,
    max_shift_samples: int = DEFAULT_OFFSET_SEARCH,
) -> AnnotationReport:
    """Estimate the report-vs-scan origin shift from weld signal maxima.

    Welds raise every sensor, so candidate shifts are scored by how many
    welds land within PEAK_MATCH_TOLERANCE samples of a local maximum of the
    cross-sensor mean. Ties prefer smaller residuals, then smaller |shift|;
    the winning shift is refined to sub-sample resolution with the mean
    matched residual.
    """
    welds = report.of_kind(Kind.WELD)
    if len(welds) < 2:
        raise AlignmentError("alignment needs at least two welds in the report")
    if scan.samples == 0:
        raise AlignmentError("alignment needs a nonempty scan")

    mean = _detrended_mean(scan)
    peaks = _signal_peaks(mean)
    if peaks.size == 0:
        raise AlignmentError("scan has no prominent signal maxima to align against")

    weld_samples = np.array(
        [np.rint(w.coordinate_mm / scan.axial_step_mm) for w in welds], dtype=np.int64
    )

    best = None  # (count, -mean_residual, -|shift|) maximized
    best_shift = None
    for shift in range(-max_shift_samples, max_shift_samples + 1):
        shifted = weld_samples + shift
        inside = (shifted >= 0) & (shifted < scan.samples)
        if not inside.any():
            continue
        pos = shifted[inside]
        right = np.searchsorted(peaks, pos)
        left = np.clip(right - 1, 0, peaks.size - 1)
        right = np.clip(right, 0, peaks.size - 1)
        dist = np.minimum(np.abs(peaks[left] - pos), np.abs(peaks[right] - pos))
        hits = dist <= PEAK_MATCH_TOLERANCE
        count = int(hits.sum())
        residual = float(dist[hits].mean()) if count else np.inf
        key = (count, -residual, -abs(shift))
        if best is None or key > best:
            best = key
            best_shift = shift

    count = best[0]
    if count * 2 <= len(welds):
        raise AlignmentError(
            f"no shift aligns more than half the welds ({count}/{len(welds)} at best)"
        )

    # sub-sample refinement from the matched weld/peak pairs
    shifted = weld_samples + best_shift
    inside = (shifted >= 0) & (shifted < scan.samples)
    pos = shifted[inside]
    right = np.searchsorted(peaks, pos)
    left = np.clip(right - 1, 0, peaks.size - 1)
    right = np.clip(right, 0, peaks.size - 1)
    use_left = np.abs(peaks[left] - pos) <= np.abs(peaks[right] - pos)
    nearest = np.where(use_left, peaks[left], peaks[right])
    dist = np.abs(nearest - pos)
    hits = dist <= PEAK_MATCH_TOLERANCE
    refinement = float((nearest[hits] - pos[hits]).mean())
    offset_mm = (best_shift + refinement) * scan.axial_step_mm
    return report.shifted(offset_mm)


def window(scan: SensorScan, threshold: float = DEFAULT_ABNORMAL_THRESHOLD) -> list[WindowImage]:
    """Cut the scan into floor(samples/64) non-overlapping unlabeled windows."""
    mask = mark_abnormal(scan, threshold)
    count = scan.samples // WINDOW_SIZE
    values = scan.values.astype(np.float64)
    out = []
    for k in range(count):
        start = k * WINDOW_SIZE
        end = start + WINDOW_SIZE
        out.append(
            WindowImage(
                pixels=values[start:end].T,
                source_range=(start, end),
                label=Label.HEALTHY,
                abnormal_mask=mask[start:end].T,
            )
        )
    return out


def center_window(
    scan: SensorScan,
    coordinate_mm: float,
    radius: int = 32,
    threshold: float = DEFAULT_ABNORMAL_THRESHOLD,
) -> WindowImage:
    """Window re-centered on the signal extremum near the given coordinate.

    Searches the cross-sensor mean within +-radius samples of the coordinate
    and centers the 64-sample window on the maximum (first index on ties).
    """
    i0 = int(np.rint(coordinate_mm / scan.axial_step_mm))
    if i0 - radius - HALF_WINDOW < 0 or i0 + radius + HALF_WINDOW > scan.samples:
        raise DataError(
            f"coordinate {coordinate_mm} mm is too close to the scan edge for "
            f"a centered window with search radius {radius}"
        )
    mean = _detrended_mean(scan)
    lo = i0 - radius
    centre = lo + int(np.argmax(mean[lo : i0 + radius + 1]))
    start = centre - HALF_WINDOW
    end = centre + HALF_WINDOW
    return WindowImage(
        pixels=scan.values[start:end].astype(np.float64).T,
        source_range=(start, end),
        label=Label.HEALTHY,
        abnormal_mask=mark_abnormal(scan, threshold)[start:end].T,
    )


def label_windows(
    windows: Sequence[WindowImage],
    report: AnnotationReport,
    axial_step_mm: float = DEFAULT_AXIAL_STEP_MM,
) -> list[WindowImage]:
    """Label each window by annotation containment; defect outranks weld."""
    coords = np.array([a.coordinate_mm for a in report.annotations])
    samples = np.floor(coords / axial_step_mm).astype(np.int64)
    is_defect = np.array([a.kind is Kind.DEFECT for a in report.annotations], dtype=bool)
    out = []
    for win in windows:
        start, end = win.source_range
        lo = np.searchsorted(samples, start, side="left")
        hi = np.searchsorted(samples, end - 1, side="right")
        if hi > lo:
            label = Label.DEFECT if is_defect[lo:hi].any() else Label.WELD
        else:
            label = Label.HEALTHY
        out.append(win.replace(label=label))
    return out


def _normal_mean(pixels: np.ndarray, normal: np.ndarray) -> float:
    return float(pixels[normal].mean())


def fill(image: WindowImage, method: FillingMethod) -> WindowImage:
    """Replace abnormal cells per the chosen filling method; normal cells stay put.

    An image with no normal cells at all falls back to method 1 (zeros).
    A sensor row (method 3) or axial column (method 5) without any normal
    cell falls back to the mean of the image's normal cells.
    """
    method = FillingMethod(method)
    mask = image.abnormal_mask
    if not mask.any():
        return image
    pixels = image.pixels.copy()
    normal = ~mask

    if method is FillingMethod.Zero or not normal.any():
        pixels[mask] = 0.0
        return image.replace(pixels=pixels)

    image_mean = _normal_mean(pixels, normal)

    if method is FillingMethod.ImageMean:
        pixels[mask] = image_mean

    elif method is FillingMethod.ColumnMean:
        # per sensor (image row): mean of that sensor's normal cells
        counts = normal.sum(axis=1)
        sums = np.where(normal, image.pixels, 0.0).sum(axis=1)
        row_mean = np.where(counts > 0, sums / np.maximum(counts, 1), image_mean)
        pixels[mask] = np.broadcast_to(row_mean[:, None], pixels.shape)[mask]

    elif method is FillingMethod.NeighborMean:
        # adjacent sensors at the same axial position; one neighbor at edges
        nb = np.empty_like(pixels)
        nb[1:-1] = (image.pixels[:-2] + image.pixels[2:]) / 2.0
        nb[0] = image.pixels[1]
        nb[-1] = image.pixels[-2]
        pixels[mask] = nb[mask]

    elif method is FillingMethod.ColumnInterp:
        # linear interpolation across the abnormal run along the sensor axis
        rows = np.arange(SENSOR_COUNT)[:, None]
        prev = np.maximum.accumulate(np.where(normal, rows, -1), axis=0)
        nxt = np.flip(
            np.minimum.accumulate(np.flip(np.where(normal, rows, SENSOR_COUNT), axis=0), axis=0),
            axis=0,
        )
        cols = np.broadcast_to(np.arange(SENSOR_COUNT)[None, :], pixels.shape)
        v_prev = image.pixels[np.clip(prev, 0, SENSOR_COUNT - 1), cols]
        v_next = image.pixels[np.clip(nxt, 0, SENSOR_COUNT - 1), cols]
        has_prev = prev >= 0
        has_next = nxt < SENSOR_COUNT
        span = np.where(has_prev & has_next & (nxt > prev), nxt - prev, 1)
        interp = v_prev + (v_next - v_prev) * (rows - prev) / span
        filled = np.where(
            has_prev & has_next,
            interp,
            np.where(has_prev, v_prev, np.where(has_next, v_next, image_mean)),
        )
        pixels[mask] = filled[mask]

    return image.replace(pixels=pixels)


def dataset_bounds(
    images: Sequence[WindowImage], method: FillingMethod
) -> NormalizationScope:
    """Whole-dataset min/max for normalize.

    Method 1 scales only normal cells, so its bounds come from normal cells;
    the other methods use the raw range over all cells.
    """
    method = FillingMethod(method)
    mn, mx = np.inf, -np.inf
    for image in images:
        values = image.pixels[~image.abnormal_mask] if method is FillingMethod.Zero else image.pixels
        if values.size:
            mn = min(mn, float(values.min()))
            mx = max(mx, float(values.max()))
    if not np.isfinite(mn):
        raise DataError("cannot compute dataset bounds: no usable cells")
    if mn == mx:
        mx = mn + 1.0
    return NormalizationScope(ScopeVariant.WHOLE_DATASET, mn, mx)


def normalize(
    image: WindowImage,
    method: FillingMethod,
    scope: NormalizationScope = PER_IMAGE,
) -> WindowImage:
    """Min-max scale a filled window.

    Method 1 maps normal cells onto [0.5, 1.0] and leaves the zeroed abnormal
    cells at 0 so imputed cells stay distinguishable; methods 2-5 map all
    cells onto [0.0, 1.0]. A degenerate range (min == max) maps onto the
    lower bound.
    """
    method = FillingMethod(method)
    pixels = image.pixels.copy()
    normal = ~image.abnormal_mask

    if method is FillingMethod.Zero:
        if not normal.any():
            pixels[:] = 0.0
            return image.replace(pixels=pixels)
        if scope.variant is ScopeVariant.WHOLE_DATASET:
            mn, mx = scope.whole_dataset_min, scope.whole_dataset_max
        else:
            mn, mx = float(pixels[normal].min()), float(pixels[normal].max())
        if mx > mn:
            pixels[normal] = 0.5 + 0.5 * (pixels[normal] - mn) / (mx - mn)
        else:
            pixels[normal] = 0.5
        pixels[image.abnormal_mask] = 0.0
        return image.replace(pixels=pixels)

    if scope.variant is ScopeVariant.WHOLE_DATASET:
        mn, mx = scope.whole_dataset_min, scope.whole_dataset_max
    else:
        mn, mx = float(pixels.min()), float(pixels.max())
    if mx > mn:
        pixels = (pixels - mn) / (mx - mn)
    else:
        pixels = np.zeros_like(pixels)
    return image.replace(pixels=pixels)


def subsample_healthy(
    images: Sequence[WindowImage], limit: int | None, seed: int = 0
) -> list[WindowImage]:
    """Optionally keep only `limit` healthy windows (seeded choice, order kept)."""
    if limit is None:
        return list(images)
    healthy_idx = [i for i, im in enumerate(images) if im.label is Label.HEALTHY]
    if len(healthy_idx) <= limit:
        return list(images)
    rng = np.random.default_rng(seed)
    keep = set(rng.permutation(np.array(healthy_idx))[:limit].tolist())
    return [
        im
        for i, im in enumerate(images)
        if im.label is not Label.HEALTHY or i in keep
    ]


def split(
    images: Sequence[WindowImage],
    fractions: dict[Label, float],
    seed: int = 0,
) -> LabeledDataset:
    """Deterministic per-class train/validation split.

    Validation gets floor(n * fraction) members per class, clamped so both
    splits stay nonempty. Deterministic in (image order, seed).
    """
    for label, f in fractions.items():
        if not 0.0 < f < 1.0:
            raise ConfigError(f"validation fraction for {Label(label).name} must be in (0,1)")
    tags = [Split.TRAIN] * len(images)
    rng = np.random.default_rng(seed)
    for label in Label:
        idx = np.array([i for i, im in enumerate(images) if im.label is label], dtype=np.int64)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise DataError(f"class {label.name} has fewer than 2 members; cannot split")
        fraction = fractions.get(label)
        if fraction is None:
            raise ConfigError(f"no validation fraction given for class {label.name}")
        n_val = int(np.floor(idx.size * fraction))
        n_val = min(max(n_val, 1), idx.size - 1)
        chosen = rng.permutation(idx)[:n_val]
        for i in chosen:
            tags[int(i)] = Split.VALIDATION
    return LabeledDataset(images=tuple(images), split_tags=tuple(tags))


def parse_fractions(data: dict) -> dict[Label, float]:
    by_name = {lab.name.lower(): lab for lab in Label}
    out = {}
    for key, value in data.items():
        if key not in by_name:
            raise ConfigError(f"unknown class {key!r} in split fractions")
        out[by_name[key]] = float(value)
    return out


DEFAULT_FRACTIONS = {Label.HEALTHY: 0.05, Label.DEFECT: 0.2, Label.WELD: 0.2}


@dataclass
class PipelineResult:
    dataset: LabeledDataset
    origin_offset_mm: float
    scope: NormalizationScope
    skipped_edge_events: int


def run_pipeline(
    scan: SensorScan,
    report: AnnotationReport,
    config: PreprocessConfig,
    fractions: dict[Label, float] | None = None,
    split_seed: int = 0,
    healthy_limit: int | None = None,
) -> PipelineResult:
    """Full chain: align, window, center, label, fill, normalize, split."""
    fractions = dict(DEFAULT_FRACTIONS) if fractions is None else fractions
    aligned = align_report(scan, report, max_shift_samples=DEFAULT_OFFSET_SEARCH)
    tiles = label_windows(
        window(scan, config.abnormal_threshold), aligned, scan.axial_step_mm
    )
    skipped = 0
    if config.centering:
        images = [w for w in tiles if w.label is Label.HEALTHY]
        for annotation in aligned.annotations:
            try:
                win = center_window(
                    scan,
                    annotation.coordinate_mm,
                    config.center_search_radius,
                    config.abnormal_threshold,
                )
            except DataError:
                skipped += 1
                continue
            images.extend(label_windows([win], aligned, scan.axial_step_mm))
    else:
        images = tiles

    images = subsample_healthy(images, healthy_limit, seed=split_seed)

    scope = (
        dataset_bounds(images, config.filling)
        if config.scope is ScopeVariant.WHOLE_DATASET
        else PER_IMAGE
    )
    processed = [
        normalize(fill(im, config.filling), config.filling, scope) for im in images
    ]
    dataset = split(processed, fractions, seed=split_seed)
    return PipelineResult(
        dataset=dataset,
        origin_offset_mm=aligned.origin_offset_mm,
        scope=scope,
        skipped_edge_events=skipped,
    )
