import numpy as np
import pytest

from conftest import make_window
from mflkit.errors import DataError
from mflkit.scan import Label, LabeledDataset, Split
from mflkit.store import (
    config_hash,
    load_dataset,
    output_lock,
    read_window,
    save_dataset,
    write_window,
)


def test_window_file_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(7)
    win = make_window(rng, abnormal_fraction=0.2, label=Label.WELD)
    path = tmp_path / "w.mflw"
    write_window(win, path)
    assert path.stat().st_size == 4 + 1 + 512 + 64 * 64 * 8
    again = read_window(path, win.source_range)
    assert again.label is Label.WELD
    assert np.array_equal(again.pixels, win.pixels)
    assert np.array_equal(again.abnormal_mask, win.abnormal_mask)


def test_read_window_rejects_garbage(tmp_path):
    path = tmp_path / "bad.mflw"
    path.write_bytes(b"XXXX" + b"\0" * 100)
    with pytest.raises(DataError):
        read_window(path)


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    images = [
        make_window(rng, 0.1, label)
        for label in (Label.HEALTHY, Label.DEFECT, Label.WELD, Label.HEALTHY)
    ]
    ds = LabeledDataset(
        images=tuple(images),
        split_tags=(Split.TRAIN, Split.TRAIN, Split.VALIDATION, Split.VALIDATION),
    )
    save_dataset(ds, tmp_path, {"stage": "test"})
    again = load_dataset(tmp_path)
    assert again.split_tags == ds.split_tags
    assert again.class_counts == ds.class_counts
    for a, b in zip(again.images, ds.images):
        assert np.array_equal(a.pixels, b.pixels)
        assert a.source_range == b.source_range


def test_config_hash_is_order_insensitive_and_stable():
    a = config_hash({"x": 1, "y": [1, 2]})
    b = config_hash({"y": [1, 2], "x": 1})
    assert a == b
    assert a != config_hash({"x": 2, "y": [1, 2]})


def test_output_lock_conflicts(tmp_path):
    with output_lock(tmp_path):
        with pytest.raises(DataError, match="locked"):
            with output_lock(tmp_path):
                pass
    # released after the first context exits
    with output_lock(tmp_path):
        pass
