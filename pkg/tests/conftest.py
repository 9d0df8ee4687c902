import numpy as np
import pytest

from mflkit.scan import Label, WindowImage
from mflkit.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def small_run():
    """A small synthetic run shared by read-only tests."""
    config = SynthConfig(
        samples=30_000,
        weld_count=12,
        defect_count=8,
        dead_sensor_count=2,
        report_offset_mm=120.0,
        report_jitter_mm=0.0,
        seed=5,
    )
    return (config,) + generate(config)


def make_window(rng=None, abnormal_fraction=0.1, label=Label.HEALTHY):
    """Random raw-count window with a random abnormal mask."""
    rng = rng or np.random.default_rng(0)
    pixels = rng.uniform(2000.0, 4095.0, size=(64, 64))
    mask = rng.random((64, 64)) < abnormal_fraction
    pixels[mask] = rng.uniform(0.0, 1999.0, size=int(mask.sum()))
    return WindowImage(pixels=pixels, source_range=(0, 64), label=label, abnormal_mask=mask)
