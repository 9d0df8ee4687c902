"""Deterministic synthetic scan generator.

Produces scans with weld ridges, localized defect perturbations, dead-sensor
spans, and a paired ground-truth / as-delivered report, so the preprocessing
and training pipeline can be validated without proprietary inspection data.

Signal model:

* background: the baseline level plus a smooth axial wander field and a
  per-sensor gain spread, so healthy windows carry the same low-frequency
  texture that event windows sit on (plain i.i.d. noise alone makes the two
  classes statistically disjoint in a way real scans are not);
* welds: Gaussian ridge along the axial direction (sigma ~2 samples),
  uniform over all 64 sensors;
* defects: dipole-like pair of 2-D Gaussian lobes of opposite sign covering
  2-6 adjacent sensors;
* dead sensors: whole-sensor spans forced to raw value 0;
* noise: i.i.d. Gaussian on top, then rounding and clipping to [0, 4095].

With default levels every live cell stays above the 2000-count abnormality
threshold, so the zeroed dead-sensor cells are exactly the below-threshold
cells.

All randomness flows through one PCG64 stream seeded from the config, so a
config maps to bit-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ConfigError
from .scan import (
    DEFAULT_AXIAL_STEP_MM,
    DEFAULT_SENSOR_PITCH_MM,
    RAW_MAX,
    SENSOR_COUNT,
    Annotation,
    AnnotationReport,
    Kind,
    SensorScan,
)

# Events keep at least this many samples between them so that one window
# never covers two events, and at least EDGE_MARGIN samples from scan ends so
# centered windows never run off the scan.
MIN_EVENT_GAP = 160
EDGE_MARGIN = 128

WELD_SIGMA_SAMPLES = 2.0
DEFECT_SIGMA_AXIAL = 3.0
DEFECT_LOBE_OFFSET = 4  # samples between the dipole lobes
WANDER_SMOOTHING_SAMPLES = 150.0
SENSOR_GAIN_CLIP = 2.5  # sigmas
DEFECTED_WELD_RATE = 34.0 / 1462.0


@dataclass(frozen=True)
class SynthConfig:
    samples: int
    baseline_level: float = 3000.0
    noise_sigma: float = 60.0
    background_wander: float | None = None  # std of the smooth axial wander; default 1.2x noise
    sensor_gain_sigma: float | None = None  # per-sensor offset spread; default 0.9x noise
    weld_count: int = 0
    defect_count: int = 0
    weld_amplitude: float = 300.0
    defect_amplitude: float = 380.0
    dead_sensor_count: int = 0
    report_offset_mm: float = 0.0
    report_jitter_mm: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.background_wander is None:
            object.__setattr__(self, "background_wander", 1.2 * self.noise_sigma)
        if self.sensor_gain_sigma is None:
            object.__setattr__(self, "sensor_gain_sigma", 0.9 * self.noise_sigma)
        if min(self.samples, self.weld_count, self.defect_count, self.dead_sensor_count) < 0:
            raise ConfigError("counts must be >= 0")
        if min(self.noise_sigma, self.report_jitter_mm, self.background_wander, self.sensor_gain_sigma) < 0:
            raise ConfigError("noise and jitter scales must be >= 0")
        if self.baseline_level + self.weld_amplitude > RAW_MAX:
            raise ConfigError(
                f"baseline_level + weld_amplitude must stay within [0, {RAW_MAX}]"
            )
        if (self.weld_count or self.defect_count) and self.samples < SENSOR_COUNT:
            raise ConfigError("need at least 64 samples to place events")

    @staticmethod
    def from_json(path: str | Path) -> "SynthConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            return SynthConfig(**data)
        except TypeError as exc:
            raise ConfigError(f"bad synth config: {exc}") from exc

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1), encoding="utf-8")


def default_desk_config() -> SynthConfig:
    """Desk-scale run whose event density tracks the reference field data.

    745 defects / 4,470,704 samples and 1462 welds / 4,470,704 samples scale
    to 33 defects and 65 welds over 200,000 samples.
    """
    return SynthConfig(
        samples=200_000,
        weld_count=65,
        defect_count=33,
        dead_sensor_count=3,
        report_offset_mm=120.0,
        report_jitter_mm=1.0,
        seed=2207,
    )


def _place_events(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    """Event sample positions, pairwise >= MIN_EVENT_GAP apart, away from edges."""
    n = config.weld_count + config.defect_count
    if n == 0:
        return np.empty(0, dtype=np.int64)
    usable = config.samples - 2 * EDGE_MARGIN
    slot = usable / n
    if slot < MIN_EVENT_GAP:
        raise ConfigError(
            f"cannot place {n} events in {config.samples} samples with gap {MIN_EVENT_GAP}"
        )
    jitter_span = max(slot - MIN_EVENT_GAP, 0.0)
    centers = EDGE_MARGIN + slot * (np.arange(n) + 0.5)
    jitter = rng.uniform(-jitter_span / 2.0, jitter_span / 2.0, size=n)
    return np.round(centers + jitter).astype(np.int64)


def generate(config: SynthConfig) -> tuple[SensorScan, AnnotationReport, AnnotationReport]:
    """Build (scan, clean ground-truth report, offset/jittered delivered report)."""
    rng = np.random.default_rng(config.seed)
    grid = np.full((config.samples, SENSOR_COUNT), config.baseline_level, dtype=np.float64)

    if config.background_wander > 0 and config.samples > 8:
        wander = gaussian_filter1d(rng.standard_normal(config.samples), WANDER_SMOOTHING_SAMPLES)
        std = wander.std()
        if std > 0:
            grid += (config.background_wander / std) * wander[:, None]
    if config.sensor_gain_sigma > 0:
        gains = rng.normal(0.0, config.sensor_gain_sigma, size=SENSOR_COUNT)
        clip = SENSOR_GAIN_CLIP * config.sensor_gain_sigma
        grid += np.clip(gains, -clip, clip)[None, :]

    positions = _place_events(rng, config)
    kinds = np.array(
        [Kind.WELD] * config.weld_count + [Kind.DEFECT] * config.defect_count, dtype=object
    )
    rng.shuffle(kinds)

    axis = np.arange(config.samples, dtype=np.float64)
    annotations = []
    for pos, kind in zip(positions, kinds):
        if kind is Kind.WELD:
            ridge = config.weld_amplitude * np.exp(
                -0.5 * ((axis - pos) / WELD_SIGMA_SAMPLES) ** 2
            )
            grid += ridge[:, None]
            defected = bool(rng.random() < DEFECTED_WELD_RATE)
            annotations.append(Annotation(Kind.WELD, pos * DEFAULT_AXIAL_STEP_MM, defected))
        else:
            width = int(rng.integers(3, 7))  # sensors covered by the anomaly
            sensor0 = int(rng.integers(2, SENSOR_COUNT - 2 - width))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            sensors = np.arange(SENSOR_COUNT, dtype=np.float64)
            across = np.exp(-0.5 * ((sensors - (sensor0 + width / 2.0)) / (width / 2.5)) ** 2)
            lo, hi = max(pos - 20, 0), min(pos + 21, config.samples)
            ax = axis[lo:hi]
            lobe_plus = np.exp(-0.5 * ((ax - (pos - DEFECT_LOBE_OFFSET)) / DEFECT_SIGMA_AXIAL) ** 2)
            lobe_minus = np.exp(-0.5 * ((ax - (pos + DEFECT_LOBE_OFFSET)) / DEFECT_SIGMA_AXIAL) ** 2)
            bump = sign * config.defect_amplitude * (lobe_plus - 0.6 * lobe_minus)
            grid[lo:hi] += bump[:, None] * across[None, :]
            annotations.append(Annotation(Kind.DEFECT, pos * DEFAULT_AXIAL_STEP_MM, True))

    if config.noise_sigma > 0:
        grid += rng.normal(0.0, config.noise_sigma, size=grid.shape)

    # dead sensors: zeroed spans overwrite signal and noise
    for _ in range(config.dead_sensor_count):
        sensor = int(rng.integers(0, SENSOR_COUNT))
        span = int(rng.integers(500, 5001))
        start = int(rng.integers(0, max(config.samples - span, 1)))
        grid[start : start + span, sensor] = 0.0

    values = np.clip(np.rint(grid), 0, RAW_MAX).astype(np.uint16)
    scan = SensorScan(
        values=values,
        axial_step_mm=DEFAULT_AXIAL_STEP_MM,
        sensor_pitch_mm=DEFAULT_SENSOR_PITCH_MM,
        run_id=f"synth-{config.seed}",
    )

    clean = AnnotationReport(tuple(annotations), origin_offset_mm=0.0)
    jitter = (
        rng.uniform(-config.report_jitter_mm, config.report_jitter_mm, size=len(annotations))
        if config.report_jitter_mm > 0
        else np.zeros(len(annotations))
    )
    delivered = AnnotationReport(
        tuple(
            Annotation(
                a.kind,
                max(a.coordinate_mm + config.report_offset_mm + float(j), 0.0),
                a.defected,
                a.note,
            )
            for a, j in zip(annotations, jitter)
        ),
        origin_offset_mm=0.0,
    )
    return scan, clean, delivered
