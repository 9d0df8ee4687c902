"""Preprocessing/architecture comparison grids.

Each grid cell preprocesses the same scan with one (filling, scope,
centering) combination, balances the training split, trains one model with a
shared seed, and reports per-class validation recalls plus the
support-weighted average, shaped like the comparison tables the CLI writes
to CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

from .augment import balance, default_policies
from .errors import ConfigError
from .metrics import ConfusionMatrix
from .preprocess import (
    FillingMethod,
    PreprocessConfig,
    ScopeVariant,
    run_pipeline,
)
from .scan import AnnotationReport, Label, LabeledDataset, SensorScan, Split
from .train import TrainConfig, evaluate, train


@dataclass(frozen=True)
class AblationGrid:
    fillings: tuple[FillingMethod, ...] = tuple(FillingMethod)
    scopes: tuple[ScopeVariant, ...] = (ScopeVariant.PER_IMAGE,)
    centering: tuple[bool, ...] = (True,)
    archs: tuple[str, ...] = ("cnn5",)

    def cells(self):
        for arch in self.archs:
            for filling in self.fillings:
                for scope in self.scopes:
                    for centered in self.centering:
                        yield arch, FillingMethod(filling), ScopeVariant(scope), centered

    @staticmethod
    def from_dict(data: dict) -> "AblationGrid":
        try:
            return AblationGrid(
                fillings=tuple(FillingMethod(f) for f in data.get("fillings", list(FillingMethod))),
                scopes=tuple(ScopeVariant(s) for s in data.get("scopes", ["image"])),
                centering=tuple(bool(c) for c in data.get("centering", [True])),
                archs=tuple(data.get("archs", ["cnn5"])),
            )
        except ValueError as exc:
            raise ConfigError(f"bad ablation grid: {exc}") from exc


@dataclass
class AblationRow:
    method: str
    recalls: list[float]
    average: float
    cell: dict = field(default_factory=dict)


def _cell_label(arch: str, filling: FillingMethod, scope: ScopeVariant, centered: bool, approximate: bool) -> str:
    name = {"cnn5": "CNN-5", "cnn5_lrn": "CNN-5+LRN", "cnn2": "CNN-2", "raynet": "RayNet"}[arch]
    if approximate:
        name += "*"
    scope_word = "image" if scope is ScopeVariant.PER_IMAGE else "whole"
    centred = "centered" if centered else "uncentered"
    return f"{name} (filling {int(filling)}) ({scope_word}, {centred})"


def run_ablation(
    scan: SensorScan,
    report: AnnotationReport,
    grid: AblationGrid,
    base_preprocess: PreprocessConfig,
    train_config: TrainConfig,
    split_seed: int = 0,
    healthy_limit: int | None = None,
) -> list[AblationRow]:
    rows = []
    for arch, filling, scope, centered in grid.cells():
        cfg = replace(base_preprocess, filling=filling, scope=scope, centering=centered)
        result = run_pipeline(
            scan, report, cfg, split_seed=split_seed, healthy_limit=healthy_limit
        )
        dataset = result.dataset
        train_images = list(dataset.subset(Split.TRAIN))
        counts = {lab: sum(1 for im in train_images if im.label is lab) for lab in Label}
        balanced = balance(train_images, default_policies(counts, seed=train_config.seed))
        merged = LabeledDataset(
            images=tuple(balanced) + dataset.subset(Split.VALIDATION),
            split_tags=(Split.TRAIN,) * len(balanced)
            + (Split.VALIDATION,) * len(dataset.subset(Split.VALIDATION)),
        )
        cell_config = replace(train_config, arch=arch)
        run = train(merged, cell_config)
        _, cm = evaluate(run.architecture, merged.subset(Split.VALIDATION), cell_config.batch_size)
        rows.append(
            AblationRow(
                method=_cell_label(arch, filling, scope, centered, run.architecture.approximate),
                recalls=cm.recalls(),
                average=cm.average_recall(),
                cell={
                    "arch": arch,
                    "filling": int(filling),
                    "scope": scope.value,
                    "centering": centered,
                },
            )
        )
    return rows


def write_ablation_csv(rows: list[AblationRow], num_classes: int, path: str | Path) -> None:
    """Comparison table: method, one recall column per class, then the average."""
    class_names = ["healthy", "anomaly"] if num_classes == 2 else ["healthy", "defect", "weld"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + [f"recall_{c}" for c in class_names] + ["average"])
        for row in rows:
            writer.writerow(
                [row.method]
                + [f"{100 * r:.2f}" for r in row.recalls]
                + [f"{100 * row.average:.2f}"]
            )


def recalls_to_csv(cm: ConfusionMatrix, num_classes: int, path: str | Path) -> None:
    class_names = ["healthy", "anomaly"] if num_classes == 2 else ["healthy", "defect", "weld"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "support", "recall"])
        for k, name in enumerate(class_names):
            writer.writerow([name, int(cm.supports[k]), f"{100 * cm.recall(k):.2f}"])
        writer.writerow(["average", cm.total, f"{100 * cm.average_recall():.2f}"])
