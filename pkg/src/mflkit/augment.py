"""Class-conditional augmentation used to balance the training split.

Geometric kinds (rotations, flips, transpose) permute pixels exactly;
elastic, grid, and optical distortions resample with bilinear interpolation
and reflected borders. Abnormal masks ride along (nearest-neighbor for the
resampling kinds) and labels are inherited.

Weld images keep their left/right reading direction, so the kinds that swap
axes (Rotate90, Rotate270, Transpose, RandomRotate90) are not allowed for
welds; healthy images are never augmented at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import ConfigError, DataError
from .scan import Label, WindowImage

Seed = int | Sequence[int]


class AugmentationKind(str, Enum):
    Rotate90 = "Rotate90"
    Rotate180 = "Rotate180"
    Rotate270 = "Rotate270"
    VerticalFlip = "VerticalFlip"
    HorizontalFlip = "HorizontalFlip"
    ElasticTransform = "ElasticTransform"
    GridDistortion = "GridDistortion"
    OpticalDistortion = "OpticalDistortion"
    Transpose = "Transpose"
    RandomRotate90 = "RandomRotate90"


KIND_ORDER = tuple(AugmentationKind)
WELD_FORBIDDEN = frozenset(
    {
        AugmentationKind.Rotate90,
        AugmentationKind.Rotate270,
        AugmentationKind.Transpose,
        AugmentationKind.RandomRotate90,
    }
)
DEFECT_KINDS = KIND_ORDER
WELD_KINDS = tuple(k for k in KIND_ORDER if k not in WELD_FORBIDDEN)


@dataclass(frozen=True)
class DistortionParams:
    """Knobs for the resampling augmentations."""

    elastic_alpha: float = 1.0  # peak displacement, pixels
    elastic_sigma: float = 8.0  # smoothing of the displacement field, pixels
    grid_steps: int = 4  # 5x5 control grid
    grid_limit: float = 0.3  # per-cell scale jitter
    optical_limit: float = 0.05  # radial distortion coefficient bound


DEFAULT_DISTORTION = DistortionParams()


@dataclass(frozen=True)
class ClassAugmentPolicy:
    label: Label
    target_count: int
    kinds: tuple[AugmentationKind, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        label = Label(self.label)
        object.__setattr__(self, "label", label)
        if label is Label.HEALTHY:
            raise ConfigError("healthy images are never augmented")
        kinds = tuple(AugmentationKind(k) for k in self.kinds)
        if not kinds:
            kinds = WELD_KINDS if label is Label.WELD else DEFECT_KINDS
        if label is Label.WELD:
            bad = [k.value for k in kinds if k in WELD_FORBIDDEN]
            if bad:
                raise ConfigError(f"kinds not allowed for welds: {bad}")
        # keep the canonical kind order regardless of input order
        object.__setattr__(self, "kinds", tuple(k for k in KIND_ORDER if k in set(kinds)))
        if self.target_count < 0:
            raise ConfigError("target_count must be >= 0")

    @staticmethod
    def from_dict(data: dict) -> "ClassAugmentPolicy":
        label = {lab.name.lower(): lab for lab in Label}.get(str(data.get("class", "")).lower())
        if label is None:
            raise ConfigError(f"unknown augmentation class {data.get('class')!r}")
        return ClassAugmentPolicy(
            label=label,
            target_count=int(data["target_count"]),
            kinds=tuple(data.get("kinds", ())),
            seed=int(data.get("seed", 0)),
        )


def _resample(pixels: np.ndarray, mask: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    coords = np.stack([rows, cols])
    out = map_coordinates(pixels, coords, order=1, mode="reflect")
    out_mask = map_coordinates(mask.astype(np.uint8), coords, order=0, mode="reflect")
    return np.clip(out, 0.0, 1.0), out_mask.astype(bool)


def _elastic(pixels, mask, rng, params: DistortionParams):
    if params.elastic_alpha == 0.0:
        return pixels.copy(), mask.copy()
    shape = pixels.shape
    dr = gaussian_filter(rng.uniform(-1.0, 1.0, shape), params.elastic_sigma)
    dc = gaussian_filter(rng.uniform(-1.0, 1.0, shape), params.elastic_sigma)
    peak = max(np.abs(dr).max(), np.abs(dc).max())
    if peak > 0:
        dr = dr / peak * params.elastic_alpha
        dc = dc / peak * params.elastic_alpha
    rows, cols = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return _resample(pixels, mask, rows + dr, cols + dc)


def _grid_axis(rng, size: int, params: DistortionParams) -> np.ndarray:
    """Piecewise-linear output->input coordinate map for one axis."""
    nodes = np.linspace(0.0, size - 1.0, params.grid_steps + 1)
    widths = np.diff(nodes) * (1.0 + rng.uniform(-params.grid_limit, params.grid_limit, params.grid_steps))
    warped = np.concatenate([[0.0], np.cumsum(widths)])
    warped *= (size - 1.0) / warped[-1]
    return np.interp(np.arange(size, dtype=np.float64), warped, nodes)


def _grid(pixels, mask, rng, params: DistortionParams):
    size = pixels.shape[0]
    row_map = _grid_axis(rng, size, params)
    col_map = _grid_axis(rng, size, params)
    rows, cols = np.meshgrid(row_map, col_map, indexing="ij")
    return _resample(pixels, mask, rows, cols)


def _optical(pixels, mask, rng, params: DistortionParams):
    size = pixels.shape[0]
    k = rng.uniform(-params.optical_limit, params.optical_limit)
    centre = (size - 1) / 2.0
    r = (np.arange(size, dtype=np.float64) - centre) / centre
    u, v = np.meshgrid(r, r, indexing="ij")
    factor = 1.0 + k * (u * u + v * v)
    return _resample(pixels, mask, centre + u * factor * centre, centre + v * factor * centre)


def apply(
    image: WindowImage,
    kind: AugmentationKind,
    seed: Seed = 0,
    params: DistortionParams = DEFAULT_DISTORTION,
) -> WindowImage:
    """One augmented copy; deterministic in (image, kind, seed)."""
    kind = AugmentationKind(kind)
    pixels, mask = image.pixels, image.abnormal_mask

    if kind is AugmentationKind.RandomRotate90:
        k = int(np.random.default_rng(seed).integers(0, 4))
        pixels, mask = np.rot90(pixels, k), np.rot90(mask, k)
    elif kind is AugmentationKind.Rotate90:
        pixels, mask = np.rot90(pixels, 1), np.rot90(mask, 1)
    elif kind is AugmentationKind.Rotate180:
        pixels, mask = np.rot90(pixels, 2), np.rot90(mask, 2)
    elif kind is AugmentationKind.Rotate270:
        pixels, mask = np.rot90(pixels, 3), np.rot90(mask, 3)
    elif kind is AugmentationKind.VerticalFlip:
        pixels, mask = np.flipud(pixels), np.flipud(mask)
    elif kind is AugmentationKind.HorizontalFlip:
        pixels, mask = np.fliplr(pixels), np.fliplr(mask)
    elif kind is AugmentationKind.Transpose:
        pixels, mask = pixels.T, mask.T
    else:
        rng = np.random.default_rng(seed)
        fn = {
            AugmentationKind.ElasticTransform: _elastic,
            AugmentationKind.GridDistortion: _grid,
            AugmentationKind.OpticalDistortion: _optical,
        }[kind]
        pixels, mask = fn(pixels, mask, rng, params)

    return image.replace(pixels=np.ascontiguousarray(pixels), abnormal_mask=np.ascontiguousarray(mask))


def balance(
    train: Sequence[WindowImage],
    policies: Sequence[ClassAugmentPolicy],
    params: DistortionParams = DEFAULT_DISTORTION,
) -> list[WindowImage]:
    """Append augmented copies until each policy's class reaches its target.

    Originals are kept untouched and in order. Copy j of original i cycles
    through the policy's kinds, with its own seed derived from
    (policy seed, class, i, j), so generation order never matters.
    """
    out = list(train)
    seen = set()
    for policy in policies:
        if policy.label in seen:
            raise ConfigError(f"duplicate policy for class {policy.label.name}")
        seen.add(policy.label)
        originals = [im for im in train if im.label is policy.label]
        current = len(originals)
        if policy.target_count < current:
            raise DataError(
                f"target {policy.target_count} below current count {current} "
                f"for class {policy.label.name}"
            )
        if current == 0 and policy.target_count > 0:
            raise DataError(f"no {policy.label.name} images to augment")
        needed = policy.target_count - current
        per, rem = divmod(needed, current) if current else (0, 0)
        for i, original in enumerate(originals):
            copies = per + (1 if i < rem else 0)
            for j in range(copies):
                kind = policy.kinds[j % len(policy.kinds)]
                out.append(
                    apply(original, kind, seed=[policy.seed, int(policy.label), i, j], params=params)
                )
    return out


def default_policies(
    train_counts: dict[Label, int], seed: int = 0
) -> list[ClassAugmentPolicy]:
    """15x inflation for defects, 10x for welds."""
    policies = []
    if train_counts.get(Label.DEFECT, 0) > 0:
        policies.append(
            ClassAugmentPolicy(Label.DEFECT, train_counts[Label.DEFECT] * 15, seed=seed)
        )
    if train_counts.get(Label.WELD, 0) > 0:
        policies.append(
            ClassAugmentPolicy(Label.WELD, train_counts[Label.WELD] * 10, seed=seed)
        )
    return policies
