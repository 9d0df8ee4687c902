import numpy as np
import pytest

from conftest import make_window
from mflkit.augment import (
    AugmentationKind,
    ClassAugmentPolicy,
    DEFECT_KINDS,
    WELD_KINDS,
    apply,
    balance,
    default_policies,
)
from mflkit.errors import ConfigError, DataError
from mflkit.scan import Label, WindowImage


def unit_window(rng=None, label=Label.DEFECT):
    rng = rng or np.random.default_rng(0)
    win = make_window(rng, abnormal_fraction=0.05, label=label)
    pixels = (win.pixels - win.pixels.min()) / (win.pixels.max() - win.pixels.min())
    return win.replace(pixels=pixels)


class TestGeometricLaws:
    def test_rotate90_four_times_is_identity(self):
        win = unit_window()
        out = win
        for _ in range(4):
            out = apply(out, AugmentationKind.Rotate90)
        assert np.array_equal(out.pixels, win.pixels)
        assert np.array_equal(out.abnormal_mask, win.abnormal_mask)

    def test_rotate90_then_rotate270_is_identity(self):
        win = unit_window()
        out = apply(apply(win, AugmentationKind.Rotate90), AugmentationKind.Rotate270)
        assert np.array_equal(out.pixels, win.pixels)

    def test_rotate180_equals_both_flips(self):
        win = unit_window()
        a = apply(win, AugmentationKind.Rotate180)
        b = apply(apply(win, AugmentationKind.VerticalFlip), AugmentationKind.HorizontalFlip)
        assert np.array_equal(a.pixels, b.pixels)
        assert np.array_equal(a.abnormal_mask, b.abnormal_mask)

    @pytest.mark.parametrize(
        "kind",
        [
            AugmentationKind.VerticalFlip,
            AugmentationKind.HorizontalFlip,
            AugmentationKind.Transpose,
            AugmentationKind.Rotate180,
        ],
    )
    def test_involutions(self, kind):
        win = unit_window()
        out = apply(apply(win, kind), kind)
        assert np.array_equal(out.pixels, win.pixels)
        assert np.array_equal(out.abnormal_mask, win.abnormal_mask)

    def test_random_rotate90_is_reproducible_rotation(self):
        win = unit_window()
        out1 = apply(win, AugmentationKind.RandomRotate90, seed=42)
        out2 = apply(win, AugmentationKind.RandomRotate90, seed=42)
        assert np.array_equal(out1.pixels, out2.pixels)
        candidates = [win.pixels] + [np.rot90(win.pixels, k) for k in (1, 2, 3)]
        assert any(np.array_equal(out1.pixels, c) for c in candidates)


class TestDistortions:
    def test_elastic_zero_scale_is_identity(self):
        from mflkit.augment import DistortionParams

        win = unit_window()
        out = apply(
            win,
            AugmentationKind.ElasticTransform,
            seed=3,
            params=DistortionParams(elastic_alpha=0.0),
        )
        assert np.array_equal(out.pixels, win.pixels)

    @pytest.mark.parametrize(
        "kind",
        [
            AugmentationKind.ElasticTransform,
            AugmentationKind.GridDistortion,
            AugmentationKind.OpticalDistortion,
        ],
    )
    def test_distortions_preserve_range_shape_and_determinism(self, kind):
        win = unit_window()
        out1 = apply(win, kind, seed=11)
        out2 = apply(win, kind, seed=11)
        other = apply(win, kind, seed=12)
        assert out1.pixels.shape == (64, 64)
        assert np.array_equal(out1.pixels, out2.pixels)
        assert not np.array_equal(out1.pixels, other.pixels)
        assert out1.pixels.min() >= 0.0 and out1.pixels.max() <= 1.0
        assert out1.abnormal_mask.dtype == bool

    def test_label_is_inherited(self):
        win = unit_window(label=Label.WELD)
        assert apply(win, AugmentationKind.ElasticTransform, seed=1).label is Label.WELD


class TestPolicies:
    def test_weld_policy_rejects_axis_swapping_kinds(self):
        with pytest.raises(ConfigError, match="not allowed"):
            ClassAugmentPolicy(Label.WELD, 10, kinds=(AugmentationKind.Rotate90,))

    def test_healthy_never_augmented(self):
        with pytest.raises(ConfigError, match="healthy"):
            ClassAugmentPolicy(Label.HEALTHY, 10)

    def test_default_kind_sets(self):
        assert len(DEFECT_KINDS) == 10
        assert len(WELD_KINDS) == 6
        assert AugmentationKind.Rotate90 not in WELD_KINDS
        assert AugmentationKind.Transpose not in WELD_KINDS

    def test_from_dict(self):
        p = ClassAugmentPolicy.from_dict(
            {"class": "weld", "target_count": 20, "kinds": ["Rotate180"], "seed": 5}
        )
        assert p.label is Label.WELD and p.kinds == (AugmentationKind.Rotate180,)


class TestBalance:
    def _originals(self, n, label=Label.DEFECT):
        rng = np.random.default_rng(int(label) + 100)
        return [unit_window(rng, label=label) for _ in range(n)]

    def test_target_equal_to_current_is_noop(self):
        originals = self._originals(5)
        out = balance(originals, [ClassAugmentPolicy(Label.DEFECT, 5)])
        assert out == originals

    def test_copy_counts_and_original_retention(self):
        originals = self._originals(7) + self._originals(3, Label.WELD)
        out = balance(
            originals,
            [
                ClassAugmentPolicy(Label.DEFECT, 7 * 3 + 2, seed=1),
                ClassAugmentPolicy(Label.WELD, 3 * 2, seed=1),
            ],
        )
        assert out[: len(originals)] == originals
        labels = [im.label for im in out]
        assert labels.count(Label.DEFECT) == 23
        assert labels.count(Label.WELD) == 6

    def test_generation_is_deterministic(self):
        originals = self._originals(4)
        policies = [ClassAugmentPolicy(Label.DEFECT, 16, seed=7)]
        a = balance(originals, policies)
        b = balance(originals, policies)
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))

    def test_target_below_current_rejected(self):
        with pytest.raises(DataError, match="below current"):
            balance(self._originals(5), [ClassAugmentPolicy(Label.DEFECT, 4)])

    def test_default_policies_mirror_reference_inflation(self):
        policies = default_policies({Label.DEFECT: 569, Label.WELD: 1130})
        by_label = {p.label: p for p in policies}
        assert by_label[Label.DEFECT].target_count == 8535
        assert by_label[Label.WELD].target_count == 11300
