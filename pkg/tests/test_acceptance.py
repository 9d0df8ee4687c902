"""Acceptance suite: one test (or parametrized group) per criterion.

Each case prints a `[criterion N] ... PASS/FAIL` line so the suite doubles
as a checklist. Reference recall tables live in REFERENCE_* below; two rows
of the published reference tables are internally inconsistent (the stated
per-class recalls and supports cannot produce the stated average) and are
expected to fail; see the assertion messages.
"""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import make_window
from oracles import (
    conv2d_naive,
    linear_naive,
    lrn_naive,
    maxpool2d_naive,
    numeric_gradient,
    relative_error,
)

from mflkit import preprocess, synth
from mflkit.augment import (
    AugmentationKind,
    ClassAugmentPolicy,
    apply,
    balance,
    default_policies,
)
from mflkit.metrics import weighted_average
from mflkit.models import build
from mflkit.nn import (
    Adam,
    BatchNorm2d,
    Conv2d,
    Linear,
    LocalResponseNorm,
    MaxPool2d,
    PlateauScheduler,
    ReLU,
    Sigmoid,
    Softmax,
    bce_loss,
    cross_entropy_loss,
)
from mflkit.preprocess import (
    FillingMethod,
    PreprocessConfig,
    align_report,
    fill,
    normalize,
    window,
)
from mflkit.scan import Kind, Label, LabeledDataset, SensorScan, Split
from mflkit.train import TrainConfig, evaluate, train


def report(criterion: int, description: str, ok: bool) -> None:
    print(f"\n[criterion {criterion}] {description}: {'PASS' if ok else 'FAIL'}")


def check(criterion: int, description: str, condition: bool, detail: str = "") -> None:
    report(criterion, description, condition)
    assert condition, f"criterion {criterion}: {description} {detail}"


# --------------------------------------------------------------------------
# criterion 1: reference-table average reproduction
# --------------------------------------------------------------------------

BINARY_SUPPORTS = (584, 424)
MULTI_SUPPORTS = (584, 142, 282)

# (row label, per-class recalls %, printed average %)
REFERENCE_BINARY = [
    ("CNN-2", (95.55, 82.08), 89.88),
    ("RayNet", (96.92, 80.42), 89.81),  # inconsistent as printed: computes 89.98
    ("CNN-5", (97.95, 91.51), 95.24),
    ("CNN-5+LRN", (98.29, 89.86), 94.74),
    ("CNN-5 (filling 1)", (97.95, 91.51), 95.24),
    ("CNN-5 (filling 2)", (97.95, 84.20), 92.16),
    ("CNN-5 (filling 3)", (97.26, 83.02), 91.27),
    ("CNN-5 (filling 4)", (98.63, 81.13), 91.27),
    ("CNN-5 (filling 5)", (98.12, 81.84), 91.27),
]
REFERENCE_MULTICLASS = [
    ("CNN-2", (97.60, 59.86, 92.91), 90.97),
    ("RayNet", (98.12, 85.21, 75.18), 89.88),
    ("CNN-5", (98.12, 76.76, 98.23), 95.14),
    ("CNN-5 (1) (whole)", (97.95, 64.08, 99.65), 93.65),
    ("CNN-5 (1) (image)", (98.12, 76.76, 98.23), 95.14),
    ("CNN-2 (1) (whole)", (99.32, 13.38, 96.45), 86.41),
    ("CNN-2 (1) (image)", (97.60, 59.86, 92.91), 90.97),
    ("CNN-5 (3) (whole)", (99.66, 81.69, 99.65), 97.12),
    ("CNN-2 (3) (whole)", (95.72, 13.38, 97.52), 89.58),  # inconsistent: computes 84.62
]

ALL_ROWS = [("binary", *row) for row in REFERENCE_BINARY] + [
    ("multiclass", *row) for row in REFERENCE_MULTICLASS
]


@pytest.mark.parametrize(
    "task,label,recalls,printed",
    ALL_ROWS,
    ids=[f"{t}-{label}" for t, label, *_ in ALL_ROWS],
)
def test_criterion_1_reference_table_averages(task, label, recalls, printed):
    supports = BINARY_SUPPORTS if task == "binary" else MULTI_SUPPORTS
    computed = weighted_average(recalls, supports)
    ok = abs(computed - printed) <= 0.01
    report(1, f"table arithmetic {task} {label}", ok)
    assert ok, (
        f"{label} ({task}): support-weighted mean of {recalls} over {supports} is "
        f"{computed:.2f}, printed average is {printed:.2f}; this published row is "
        f"internally inconsistent, kept as stated rather than patched"
    )


# --------------------------------------------------------------------------
# criterion 2: finite-difference gradient suite (>= 20 instances per op)
# --------------------------------------------------------------------------

TOL = 1e-5
N_INSTANCES = 20


def _layer_input_gradient_error(layer, x, train=True):
    out = layer.forward(x, train=train, rng=np.random.default_rng(555))
    direction = np.random.default_rng(999).standard_normal(out.shape)

    def scalar(xv):
        return float(
            (layer.forward(xv, train=train, rng=np.random.default_rng(555)) * direction).sum()
        )

    scalar(x)
    analytic = layer.backward(direction)
    return relative_error(analytic, numeric_gradient(scalar, x))


def _parameter_gradient_error(layer, x, param, train=True):
    direction = np.random.default_rng(998).standard_normal(
        layer.forward(x, train=train, rng=np.random.default_rng(555)).shape
    )

    def scalar(value):
        param.value = value
        return float(
            (layer.forward(x, train=train, rng=np.random.default_rng(555)) * direction).sum()
        )

    base = param.value.copy()
    scalar(base)
    layer.backward(direction)
    analytic = param.grad.copy()
    numeric = numeric_gradient(scalar, base)
    param.value = base
    return relative_error(analytic, numeric)


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_conv2d_gradients(seed):
    rng = np.random.default_rng([20, seed])
    k = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    padding = int(rng.integers(0, k))
    c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    size = int(rng.integers(k, 8))
    conv = Conv2d(c_in, c_out, k, stride=stride, padding=padding, rng=rng)
    x = rng.standard_normal((2, c_in, size, size))
    errs = [
        _layer_input_gradient_error(conv, x),
        _parameter_gradient_error(conv, x, conv.weight),
        _parameter_gradient_error(conv, x, conv.bias),
    ]
    ok = max(errs) < TOL
    if seed == N_INSTANCES - 1:
        report(2, "conv2d gradient suite", ok)
    assert ok, f"conv gradient errors {errs}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_linear_gradients(seed):
    rng = np.random.default_rng([21, seed])
    lin = Linear(int(rng.integers(1, 9)), int(rng.integers(1, 6)), rng=rng)
    x = rng.standard_normal((3, lin.in_features))
    errs = [
        _layer_input_gradient_error(lin, x),
        _parameter_gradient_error(lin, x, lin.weight),
        _parameter_gradient_error(lin, x, lin.bias),
    ]
    ok = max(errs) < TOL
    if seed == N_INSTANCES - 1:
        report(2, "linear gradient suite", ok)
    assert ok, f"linear gradient errors {errs}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_batchnorm_train_gradients(seed):
    rng = np.random.default_rng([22, seed])
    c = int(rng.integers(1, 4))
    bn = BatchNorm2d(c)
    bn.gamma.value = rng.uniform(0.5, 1.5, c)
    bn.beta.value = rng.standard_normal(c)
    x = rng.standard_normal((int(rng.integers(2, 5)), c, 3, 3)) * 2.0
    errs = [
        _layer_input_gradient_error(bn, x),
        _parameter_gradient_error(bn, x, bn.gamma),
        _parameter_gradient_error(bn, x, bn.beta),
    ]
    ok = max(errs) < TOL
    if seed == N_INSTANCES - 1:
        report(2, "batchnorm train-mode gradient suite", ok)
    assert ok, f"batchnorm gradient errors {errs}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_lrn_gradients(seed):
    rng = np.random.default_rng([23, seed])
    lrn = LocalResponseNorm(size=int(rng.choice([1, 3, 5])), alpha=0.3, beta=0.75, k=1.5)
    x = rng.standard_normal((2, int(rng.integers(1, 7)), 3, 3))
    err = _layer_input_gradient_error(lrn, x)
    ok = err < TOL
    if seed == N_INSTANCES - 1:
        report(2, "lrn gradient suite", ok)
    assert ok, f"lrn gradient error {err}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
@pytest.mark.parametrize("activation", [ReLU, Sigmoid, Softmax])
def test_criterion_2_activation_gradients(activation, seed):
    rng = np.random.default_rng([24, seed])
    layer = activation()
    x = rng.standard_normal((3, 6))
    if activation is ReLU:
        x[np.abs(x) < 0.05] += 0.1  # keep away from the kink
    err = _layer_input_gradient_error(layer, x)
    ok = err < TOL
    if seed == N_INSTANCES - 1:
        report(2, f"{activation.__name__.lower()} gradient suite", ok)
    assert ok, f"{activation.__name__} gradient error {err}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_bce_through_sigmoid_head(seed):
    rng = np.random.default_rng([25, seed])
    logits = rng.standard_normal((6, 1)) * 2.0
    labels = (rng.random(6) > 0.5).astype(np.float64)
    sigmoid = Sigmoid()

    def scalar(z):
        return bce_loss(sigmoid.forward(z), labels)[0]

    scalar(logits)
    _, dprob = bce_loss(sigmoid.forward(logits), labels)
    analytic = sigmoid.backward(dprob)
    err = relative_error(analytic, numeric_gradient(scalar, logits))
    ok = err < TOL
    if seed == N_INSTANCES - 1:
        report(2, "bce-through-sigmoid-head gradient suite", ok)
    assert ok, f"bce head gradient error {err}"


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_criterion_2_cross_entropy_gradients(seed):
    rng = np.random.default_rng([26, seed])
    logits = rng.standard_normal((5, 3)) * 3.0
    labels = rng.integers(0, 3, 5)
    _, analytic = cross_entropy_loss(logits, labels)
    numeric = numeric_gradient(lambda z: cross_entropy_loss(z, labels)[0], logits)
    err = relative_error(analytic, numeric)
    ok = err < TOL
    if seed == N_INSTANCES - 1:
        report(2, "cross-entropy gradient suite", ok)
    assert ok, f"cross-entropy gradient error {err}"


# --------------------------------------------------------------------------
# criterion 3: oracle equivalence on 200 randomized shapes per op
# --------------------------------------------------------------------------

N_ORACLE = 200


def test_criterion_3_conv2d_matches_naive_loops():
    rng = np.random.default_rng(300)
    worst = 0.0
    for _ in range(N_ORACLE):
        k = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 3))
        c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        size = int(rng.integers(max(k - 2 * padding, 1), 9))
        conv = Conv2d(c_in, c_out, k, stride=stride, padding=padding, rng=rng)
        x = rng.standard_normal((int(rng.integers(1, 3)), c_in, size, size))
        expected = conv2d_naive(x, conv.weight.value, conv.bias.value, stride, padding)
        worst = max(worst, float(np.abs(conv.forward(x) - expected).max()))
    ok = worst < 1e-12
    report(3, f"conv2d vs naive loops on {N_ORACLE} shapes (worst {worst:.2e})", ok)
    assert ok


def test_criterion_3_maxpool_matches_naive_loops():
    rng = np.random.default_rng(301)
    for _ in range(N_ORACLE):
        h, w = 2 * int(rng.integers(1, 5)), 2 * int(rng.integers(1, 5))
        x = rng.standard_normal((int(rng.integers(1, 3)), int(rng.integers(1, 4)), h, w))
        assert np.array_equal(MaxPool2d().forward(x), maxpool2d_naive(x))
    report(3, f"maxpool2d vs naive loops on {N_ORACLE} shapes (exact)", True)


def test_criterion_3_linear_matches_naive_loops():
    rng = np.random.default_rng(302)
    worst = 0.0
    for _ in range(N_ORACLE):
        lin = Linear(int(rng.integers(1, 9)), int(rng.integers(1, 9)), rng=rng)
        x = rng.standard_normal((int(rng.integers(1, 8)), lin.in_features))
        expected = linear_naive(x, lin.weight.value, lin.bias.value)
        worst = max(worst, float(np.abs(lin.forward(x) - expected).max()))
    ok = worst < 1e-12
    report(3, f"linear vs naive loops on {N_ORACLE} shapes (worst {worst:.2e})", ok)
    assert ok


def test_criterion_3_lrn_matches_naive_loops():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(N_ORACLE):
        size = int(rng.choice([1, 3, 5]))
        lrn = LocalResponseNorm(size=size, alpha=0.8, beta=0.75, k=1.2)
        x = rng.standard_normal(
            (int(rng.integers(1, 3)), int(rng.integers(1, 8)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        )
        expected = lrn_naive(x, size, 0.8, 0.75, 1.2)
        worst = max(worst, float(np.abs(lrn.forward(x) - expected).max()))
    ok = worst < 1e-12
    report(3, f"lrn vs naive loops on {N_ORACLE} shapes (worst {worst:.2e})", ok)
    assert ok


# --------------------------------------------------------------------------
# criterion 4: preprocessing properties
# --------------------------------------------------------------------------

def test_criterion_4_fills_never_touch_normal_cells_10k_windows():
    rng = np.random.default_rng(400)
    methods = list(FillingMethod)
    for i in range(10_000):
        win = make_window(rng, abnormal_fraction=float(rng.uniform(0.0, 0.5)))
        method = methods[i % 5]
        out = fill(win, method)
        normal = ~win.abnormal_mask
        assert np.array_equal(out.pixels[normal], win.pixels[normal]), f"window {i} {method}"
        if method is FillingMethod.Zero:
            scaled = normalize(out, method)
            assert np.all(scaled.pixels[win.abnormal_mask] == 0.0)
            assert np.all(
                (scaled.pixels[normal] >= 0.5) & (scaled.pixels[normal] <= 1.0)
            )
    report(4, "fill preserves normal cells on 10,000 windows; method-1 range", True)


def test_criterion_4_window_count_for_100_random_lengths():
    rng = np.random.default_rng(401)
    for _ in range(100):
        samples = int(rng.integers(0, 2000))
        scan = SensorScan(
            values=rng.integers(2500, 3500, size=(samples, 64), dtype=np.uint16)
        )
        assert len(window(scan)) == samples // 64
    report(4, "window count equals floor(samples/64) for 100 lengths", True)


def _random_alignment_config(rng, jitter):
    return synth.SynthConfig(
        samples=int(rng.integers(12_000, 20_000)),
        weld_count=int(rng.integers(5, 12)),
        defect_count=int(rng.integers(0, 6)),
        dead_sensor_count=int(rng.integers(0, 3)),
        report_offset_mm=float(rng.uniform(-300.0, 300.0)),
        report_jitter_mm=jitter,
        seed=int(rng.integers(0, 2**31)),
    )


def test_criterion_4_alignment_recovers_offsets_50_configs():
    rng = np.random.default_rng(402)
    for i in range(50):
        config = _random_alignment_config(rng, jitter=0.0)
        scan, clean, delivered = synth.generate(config)
        aligned = align_report(scan, delivered)
        err = abs(aligned.origin_offset_mm + config.report_offset_mm)
        assert err <= scan.axial_step_mm, f"config {i}: offset error {err:.2f} mm"
    report(4, "alignment recovers injected offsets (50 configs, zero jitter)", True)


def test_criterion_4_alignment_with_jitter_matches_90_percent():
    rng = np.random.default_rng(403)
    for i in range(20):
        config = _random_alignment_config(rng, jitter=3.0)
        scan, clean, delivered = synth.generate(config)
        aligned = align_report(scan, delivered)
        true_pos = np.sort(
            [a.coordinate_mm / scan.axial_step_mm for a in clean.of_kind(Kind.WELD)]
        )
        got = np.sort(
            [a.coordinate_mm / scan.axial_step_mm for a in aligned.of_kind(Kind.WELD)]
        )
        matched = (np.abs(got - true_pos) <= 5).mean()
        assert matched >= 0.9, f"config {i}: only {matched:.0%} welds matched"
    report(4, "alignment matches >= 90% of welds with +-3 mm jitter", True)


# --------------------------------------------------------------------------
# criterion 5: augmentation group laws and balance targets
# --------------------------------------------------------------------------

def test_criterion_5_augmentation_group_laws():
    rng = np.random.default_rng(500)
    win = make_window(rng, 0.1, Label.DEFECT)
    win = win.replace(pixels=(win.pixels - win.pixels.min()) / np.ptp(win.pixels))
    r90, r180, r270 = (
        AugmentationKind.Rotate90,
        AugmentationKind.Rotate180,
        AugmentationKind.Rotate270,
    )
    vf, hf, tr = (
        AugmentationKind.VerticalFlip,
        AugmentationKind.HorizontalFlip,
        AugmentationKind.Transpose,
    )
    for kind in (vf, hf, tr, r180):
        twice = apply(apply(win, kind), kind)
        assert np.array_equal(twice.pixels, win.pixels), f"{kind} not an involution"
    assert np.array_equal(apply(apply(win, r90), r270).pixels, win.pixels)
    four = win
    for _ in range(4):
        four = apply(four, r90)
    assert np.array_equal(four.pixels, win.pixels)
    both = apply(apply(win, vf), hf)
    assert np.array_equal(apply(win, r180).pixels, both.pixels)
    rr = apply(win, AugmentationKind.RandomRotate90, seed=77)
    again = apply(win, AugmentationKind.RandomRotate90, seed=77)
    assert np.array_equal(rr.pixels, again.pixels)
    candidates = [win.pixels] + [np.rot90(win.pixels, k) for k in (1, 2, 3)]
    assert any(np.array_equal(rr.pixels, c) for c in candidates)
    report(5, "augmentation involution and rotation laws (exact)", True)


def test_criterion_5_balance_reproduces_reference_targets():
    rng = np.random.default_rng(501)
    base = make_window(rng, 0.05, Label.DEFECT)
    base = base.replace(pixels=(base.pixels - base.pixels.min()) / np.ptp(base.pixels))
    defects = [base.replace(label=Label.DEFECT) for _ in range(569)]
    welds = [base.replace(label=Label.WELD) for _ in range(1130)]
    out = balance(
        defects + welds,
        [
            ClassAugmentPolicy(Label.DEFECT, 8535, seed=1),
            ClassAugmentPolicy(Label.WELD, 11300, seed=1),
        ],
    )
    labels = [im.label for im in out]
    counts = {lab: labels.count(lab) for lab in (Label.DEFECT, Label.WELD)}
    ok = counts[Label.DEFECT] == 8535 and counts[Label.WELD] == 11300
    report(5, f"balance hits reference targets {counts}", ok)
    assert ok
    assert out[: len(defects) + len(welds)] == defects + welds  # originals untouched


# --------------------------------------------------------------------------
# criterion 6: one-batch overfit oracle
# --------------------------------------------------------------------------

def test_criterion_6_overfit_one_batch():
    config = synth.SynthConfig(
        samples=9_000, weld_count=16, defect_count=16, dead_sensor_count=1, seed=11
    )
    scan, clean, _ = synth.generate(config)
    pcfg = PreprocessConfig(filling=FillingMethod.Zero, centering=True)
    result = preprocess.run_pipeline(scan, clean, pcfg, split_seed=1)
    images = list(result.dataset.images)
    events = [im for im in images if im.label is not Label.HEALTHY][:32]
    healthy = [im for im in images if im.label is Label.HEALTHY][:32]
    batch = events + healthy
    assert len(batch) == 64
    x = np.stack([im.pixels for im in batch])[:, None]
    y = (np.array([int(im.label) for im in batch]) != 0).astype(np.int64)

    arch = build("cnn5", 2, seed=0, dropout=0.33)
    adam = Adam(arch.network.parameters(), lr=0.001)
    rng = np.random.default_rng(7)
    loss = np.inf
    for _ in range(200):
        out = arch.network.forward(x, train=True, rng=rng)
        loss, grad = bce_loss(out, y)
        arch.network.backward(grad)
        adam.step()
    ok = loss < 0.01
    report(6, f"one-batch overfit: training BCE after 200 epochs = {loss:.5f}", ok)
    assert ok


# --------------------------------------------------------------------------
# criterion 7: synthetic end-to-end run
# --------------------------------------------------------------------------

def test_criterion_7_end_to_end_synthetic_run():
    config = synth.default_desk_config()
    scan, clean, delivered = synth.generate(config)
    windows_available = scan.samples // 64

    pcfg = PreprocessConfig(
        filling=FillingMethod.Zero, scope="image", centering=True
    )
    result = preprocess.run_pipeline(
        scan, delivered, pcfg, split_seed=11, healthy_limit=1200
    )
    # the desk config must tile into enough healthy windows before subsampling
    event_windows = config.weld_count + config.defect_count
    assert windows_available - event_windows >= 3000

    dataset = result.dataset
    train_images = list(dataset.subset(Split.TRAIN))
    counts = {lab: sum(1 for im in train_images if im.label is lab) for lab in Label}
    balanced = balance(train_images, default_policies(counts, seed=5))
    val = dataset.subset(Split.VALIDATION)
    merged = LabeledDataset(
        images=tuple(balanced) + val,
        split_tags=(Split.TRAIN,) * len(balanced) + (Split.VALIDATION,) * len(val),
    )

    run = train(merged, TrainConfig(arch="cnn5", num_classes=3, epochs=12, seed=3))
    _, cm = evaluate(run.architecture, val)
    recalls = cm.recalls()
    weighted = cm.average_recall()
    ok = weighted >= 0.90 and recalls[1] >= 0.80 and recalls[2] >= 0.80
    report(
        7,
        "end-to-end synthetic run: weighted "
        f"{100 * weighted:.2f}%, defect {100 * recalls[1]:.1f}%, weld {100 * recalls[2]:.1f}%",
        ok,
    )
    assert ok, f"recalls {recalls}, weighted {weighted}"


# --------------------------------------------------------------------------
# criterion 9: byte-identical CLI pipeline determinism
# --------------------------------------------------------------------------

def _run_cli(args, cwd):
    env = dict(os.environ, MFLKIT_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "mflkit.cli", *args],
        cwd=cwd,
        env=env,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def _pipeline_once(root: Path) -> dict[str, bytes]:
    root.mkdir(parents=True)
    synth_cfg = root / "synth.json"
    synth_cfg.write_text(
        json.dumps(
            {
                "samples": 24_000,
                "weld_count": 8,
                "defect_count": 6,
                "dead_sensor_count": 1,
                "report_offset_mm": 60.0,
                "report_jitter_mm": 0.5,
                "seed": 7,
            }
        )
    )
    pre_cfg = root / "pre.json"
    pre_cfg.write_text(
        json.dumps(
            {
                "preprocess": {"filling": 1, "scope": "image", "centering": True},
                "split": {"seed": 3},
            }
        )
    )
    train_cfg = root / "train.json"
    train_cfg.write_text(
        json.dumps({"arch": "cnn5", "num_classes": 3, "epochs": 2, "seed": 2})
    )
    # relative paths with cwd at the run root, so manifests from different
    # run directories can be compared byte for byte
    _run_cli(["synth", "--config", "synth.json", "--out", "synth"], root)
    _run_cli(
        [
            "preprocess",
            "--scan", "synth/scan.mfls",
            "--report", "synth/report_delivered.json",
            "--config", "pre.json",
            "--out", "dataset",
        ],
        root,
    )
    _run_cli(
        ["train", "--dataset", "dataset", "--config", "train.json", "--out", "model"],
        root,
    )
    return {
        "scan": (root / "synth" / "scan.mfls").read_bytes(),
        "synth_manifest": (root / "synth" / "manifest.json").read_bytes(),
        "dataset_manifest": (root / "dataset" / "manifest.json").read_bytes(),
        "train_manifest": (root / "model" / "manifest.json").read_bytes(),
        "checkpoint": (root / "model" / "checkpoint.mflc").read_bytes(),
        "history": (root / "model" / "history.jsonl").read_bytes(),
    }


def test_criterion_9_pipeline_determinism(tmp_path):
    first = _pipeline_once(tmp_path / "run_a")
    second = _pipeline_once(tmp_path / "run_b")
    same = {k: first[k] == second[k] for k in first}
    ok = all(same.values())
    report(9, f"pipeline determinism, byte-identical artifacts: {same}", ok)
    assert ok


# --------------------------------------------------------------------------
# criterion 8: scheduler behavior
# --------------------------------------------------------------------------

def test_criterion_8_scheduler_halving_and_clamp():
    sched = PlateauScheduler(lr=0.001, factor=0.5, min_lr=0.0001, threshold=0.0001, patience=484)
    sched.step(1.0)
    for _ in range(484):
        sched.step(1.0)
    assert sched.lr == 0.001
    sched.step(1.0)  # the 485th non-improving step halves
    ok_half = sched.lr == 0.0005
    for _ in range(485 * 8):
        sched.step(1.0)
    ok_clamp = sched.lr == 0.0001
    report(8, "scheduler halves after 485 bad steps and clamps at 1e-4", ok_half and ok_clamp)
    assert ok_half and ok_clamp
