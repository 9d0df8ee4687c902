"""Command-line entry point.

Subcommands: synth, preprocess, augment, train, eval, ablate, render.
Every command takes --out (output directory, locked for the duration),
most take --config (JSON) and --seed (overrides the config seed). Reports
land as CSV/JSONL with matplotlib figures rendered alongside.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .ablation import AblationGrid, run_ablation, recalls_to_csv, write_ablation_csv
from .augment import ClassAugmentPolicy, balance, default_policies
from .errors import ConfigError, DataError, UsageError
from .metrics import ConfusionMatrix
from .preprocess import (
    DEFAULT_FRACTIONS,
    PreprocessConfig,
    parse_fractions,
    run_pipeline,
)
from .report import (
    plot_ablation,
    plot_confusion,
    plot_history,
    render_filling_comparison,
    render_scan_strips,
    render_windows,
)
from .scan import Label, LabeledDataset, Split, read_report, read_scan, write_report, write_scan
from .store import config_hash, load_dataset, output_lock, save_dataset, write_manifest
from .synth import SynthConfig, default_desk_config, generate
from .train import TrainConfig, evaluate, load_architecture, train, write_history

log = logging.getLogger("mflkit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: invalid JSON: {exc}") from exc


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"{what} {p} does not exist")
    return p


def _manifest(out_dir: Path, command: str, config: dict, inputs: dict, outputs: dict, seeds: dict):
    write_manifest(
        out_dir,
        {
            "artifact_version": __version__,
            "command": command,
            "config": config,
            "config_hash": config_hash(config),
            "inputs": inputs,
            "outputs": outputs,
            "seeds": seeds,
        },
    )


def cmd_synth(args) -> None:
    config = SynthConfig.from_json(args.config) if args.config else default_desk_config()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    with output_lock(args.out) as out:
        scan, clean, delivered = generate(config)
        write_scan(scan, out / "scan.mfls")
        write_report(clean, out / "report_true.json")
        write_report(delivered, out / "report_delivered.json")
        _manifest(
            out,
            "synth",
            asdict(config),
            inputs={},
            outputs={
                "scan": "scan.mfls",
                "report_true": "report_true.json",
                "report_delivered": "report_delivered.json",
            },
            seeds={"synth": config.seed},
        )
    log.info(
        "synth: %d samples, %d welds, %d defects -> %s",
        config.samples,
        config.weld_count,
        config.defect_count,
        args.out,
    )


def cmd_preprocess(args) -> None:
    raw = _load_json(args.config)
    pre_cfg = PreprocessConfig.from_dict(raw.get("preprocess", {}))
    split_cfg = raw.get("split", {})
    fractions = (
        parse_fractions(split_cfg["fractions"])
        if "fractions" in split_cfg
        else dict(DEFAULT_FRACTIONS)
    )
    split_seed = args.seed if args.seed is not None else int(split_cfg.get("seed", 0))
    healthy_limit = raw.get("healthy_limit")

    scan = read_scan(_require(args.scan, "scan file"))
    report = read_report(_require(args.report, "report file"))
    with output_lock(args.out) as out:
        result = run_pipeline(
            scan,
            report,
            pre_cfg,
            fractions=fractions,
            split_seed=split_seed,
            healthy_limit=healthy_limit,
        )
        stage_config = {
            "preprocess": {
                "abnormal_threshold": pre_cfg.abnormal_threshold,
                "window_size": pre_cfg.window_size,
                "filling": int(pre_cfg.filling),
                "scope": pre_cfg.scope.value,
                "centering": pre_cfg.centering,
                "center_search_radius": pre_cfg.center_search_radius,
            },
            "split": {
                "fractions": {lab.name.lower(): f for lab, f in fractions.items()},
                "seed": split_seed,
            },
            "healthy_limit": healthy_limit,
        }
        save_dataset(
            result.dataset,
            out,
            stage_config,
            extra={
                "origin_offset_mm": result.origin_offset_mm,
                "skipped_edge_events": result.skipped_edge_events,
                "inputs": {"scan": str(args.scan), "report": str(args.report)},
                "normalization": {
                    "scope": result.scope.variant.value,
                    "min": result.scope.whole_dataset_min,
                    "max": result.scope.whole_dataset_max,
                },
            },
        )
    log.info(
        "preprocess: offset %.2f mm, counts %s -> %s",
        result.origin_offset_mm,
        result.dataset.class_counts,
        args.out,
    )


def cmd_augment(args) -> None:
    raw = _load_json(args.config)
    dataset = load_dataset(_require(args.dataset, "dataset directory"))
    train_images = list(dataset.subset(Split.TRAIN))
    if raw:
        entries = raw if isinstance(raw, list) else raw.get("policies", [])
        policies = [ClassAugmentPolicy.from_dict(e) for e in entries]
    else:
        counts = {lab: sum(1 for im in train_images if im.label is lab) for lab in Label}
        policies = default_policies(counts, seed=args.seed or 0)
    balanced = balance(train_images, policies)
    val_images = dataset.subset(Split.VALIDATION)
    merged = LabeledDataset(
        images=tuple(balanced) + val_images,
        split_tags=(Split.TRAIN,) * len(balanced) + (Split.VALIDATION,) * len(val_images),
    )
    with output_lock(args.out) as out:
        stage_config = {
            "policies": [
                {
                    "class": p.label.name.lower(),
                    "target_count": p.target_count,
                    "kinds": [k.value for k in p.kinds],
                    "seed": p.seed,
                }
                for p in policies
            ],
            "source": str(args.dataset),
        }
        save_dataset(merged, out, stage_config)
    log.info("augment: %d -> %d training images -> %s", len(train_images), len(balanced), args.out)


def cmd_train(args) -> None:
    config = TrainConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    dataset = load_dataset(_require(args.dataset, "dataset directory"))
    with output_lock(args.out) as out:
        run = train(dataset, config, checkpoint_path=out / "checkpoint.mflc")
        write_history(run.history, out / "history.jsonl")
        plot_history(run.history, out / "training_curves.png")
        _manifest(
            out,
            "train",
            config.to_dict(),
            inputs={"dataset": str(args.dataset)},
            outputs={
                "checkpoint": "checkpoint.mflc",
                "history": "history.jsonl",
                "figures": ["training_curves.png"],
            },
            seeds={"train": config.seed},
        )
    final = run.history[-1]
    log.info(
        "train: %s %d classes, final val loss %.4f, recalls %s -> %s",
        config.arch,
        config.num_classes,
        final["val_loss"],
        [f"{100 * r:.2f}" for r in final["recalls"]],
        args.out,
    )


def cmd_eval(args) -> None:
    arch, config = load_architecture(_require(args.checkpoint, "checkpoint"))
    dataset = load_dataset(_require(args.dataset, "dataset directory"))
    images = dataset.subset(Split(args.split))
    if not images:
        raise DataError(f"dataset has no {args.split} images")
    with output_lock(args.out) as out:
        loss, cm = evaluate(arch, images, config.batch_size)
        recalls_to_csv(cm, config.num_classes, out / "recalls.csv")
        class_names = ["healthy", "anomaly"] if config.num_classes == 2 else ["healthy", "defect", "weld"]
        plot_confusion(cm, class_names, out / "confusion.png")
        _manifest(
            out,
            "eval",
            {"checkpoint": str(args.checkpoint), "split": args.split},
            inputs={"dataset": str(args.dataset), "checkpoint": str(args.checkpoint)},
            outputs={
                "recalls": "recalls.csv",
                "figures": ["confusion.png"],
                "loss": loss,
                "confusion": cm.counts.tolist(),
                "recall_values": cm.recalls(),
                "average_recall": cm.average_recall(),
            },
            seeds={},
        )
    log.info(
        "eval: %s loss %.4f, average recall %.2f%% -> %s",
        arch.display_name,
        loss,
        100 * cm.average_recall(),
        args.out,
    )


def cmd_ablate(args) -> None:
    raw = _load_json(args.config)
    grid = AblationGrid.from_dict(raw.get("grid", {}))
    pre_cfg = PreprocessConfig.from_dict(raw.get("preprocess", {}))
    train_cfg = TrainConfig.from_dict(raw.get("train", {}))
    if args.seed is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    split_seed = int(raw.get("split_seed", train_cfg.seed))
    scan = read_scan(_require(args.scan, "scan file"))
    report = read_report(_require(args.report, "report file"))
    with output_lock(args.out) as out:
        rows = run_ablation(
            scan,
            report,
            grid,
            pre_cfg,
            train_cfg,
            split_seed=split_seed,
            healthy_limit=raw.get("healthy_limit"),
        )
        write_ablation_csv(rows, train_cfg.num_classes, out / "ablation.csv")
        plot_ablation(rows, out / "ablation.png")
        _manifest(
            out,
            "ablate",
            raw,
            inputs={"scan": str(args.scan), "report": str(args.report)},
            outputs={
                "table": "ablation.csv",
                "figures": ["ablation.png"],
                "rows": [
                    {"method": r.method, "recalls": r.recalls, "average": r.average}
                    for r in rows
                ],
            },
            seeds={"train": train_cfg.seed, "split": split_seed},
        )
    log.info("ablate: %d cells -> %s", len(rows), args.out)


def cmd_render(args) -> None:
    if (args.scan is None) == (args.dataset is None):
        raise UsageError("render needs exactly one of --scan or --dataset")
    with output_lock(args.out) as out:
        outputs: dict = {}
        if args.scan is not None:
            scan = read_scan(_require(args.scan, "scan file"))
            paths = render_scan_strips(scan, out)
            outputs["strips"] = [p.name for p in paths]
        else:
            dataset = load_dataset(_require(args.dataset, "dataset directory"))
            if args.compare_fillings is not None:
                idx = args.compare_fillings
                if not 0 <= idx < len(dataset.images):
                    raise DataError(f"window index {idx} out of range")
                paths = render_filling_comparison(dataset.images[idx], out, prefix=f"window_{idx:05d}")
                outputs["filling_comparison"] = [p.name for p in paths]
            else:
                paths = render_windows(dataset.images, out, limit=args.limit)
                outputs["windows"] = [p.name for p in paths]
        _manifest(
            out,
            "render",
            {
                "scan": args.scan and str(args.scan),
                "dataset": args.dataset and str(args.dataset),
                "limit": args.limit,
                "compare_fillings": args.compare_fillings,
            },
            inputs={k: v for k, v in {"scan": args.scan, "dataset": args.dataset}.items() if v},
            outputs=outputs,
            seeds={},
        )
    log.info("render: %d files -> %s", sum(len(v) for v in outputs.values()), args.out)


def build_parser() -> _Parser:
    parser = _Parser(prog="mflkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mflkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("synth", help="generate a synthetic scan and reports")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="align, window, label, fill, normalize, split")
    common(p)
    p.add_argument("--scan", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("augment", help="re-balance a dataset's training split")
    common(p)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a classifier on a window dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "validation"], default="validation")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train over a preprocessing grid and tabulate recalls")
    common(p)
    p.add_argument("--scan", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", help="render scan strips or window images to PNG")
    common(p)
    p.add_argument("--scan")
    p.add_argument("--dataset")
    p.add_argument("--limit", type=int, help="cap the number of rendered windows")
    p.add_argument("--compare-fillings", type=int, metavar="INDEX",
                   help="render one window under every filling method")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
