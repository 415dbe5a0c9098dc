"""Command-line interface.

Subcommands: ``phantom generate``, ``train seg``, ``train cls``, ``infer``,
``evaluate``, ``report``.  A JSON experiment config is the source of
hyperparameters; ``--seed``, ``--device``, and ``--out`` override single keys
per invocation.  The ``SHOULDERCT_CACHE`` environment variable sets the
default location for generated cohorts and outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, cache_dir
from .phantom import generate_cohort, read_manifest
from .pipeline import (
    atomic_write_json,
    evaluate,
    infer,
    summarize_metrics,
    train_classifier,
    train_segmentation,
)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.device is not None:
        overrides["device"] = args.device
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    return replace(cfg, **overrides) if overrides else cfg


def _split(records, seed: int, val_fraction: float):
    order = np.random.default_rng(seed).permutation(len(records))
    n_val = max(1, int(round(val_fraction * len(records))))
    val_idx = set(order[:n_val].tolist())
    train = [r for i, r in enumerate(records) if i not in val_idx]
    val = [r for i, r in enumerate(records) if i in val_idx]
    return train, val


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--device", help="override config device")
    parser.add_argument("--out", type=Path, help="override output directory")


def cmd_phantom_generate(args) -> int:
    out = args.out or cache_dir() / "cohort"
    manifest = generate_cohort(args.n, out, seed=args.seed or 0,
                               spacing=args.spacing, noise_std=args.noise_std)
    print(f"wrote {len(manifest)} phantoms to {out}")
    return 0


def _train(args, trainer, default_name: str) -> int:
    cfg = _load_config(args)
    records = read_manifest(args.manifest)
    train_records, val_records = _split(records, cfg.seed, args.val_fraction)
    ckpt = Path(cfg.out_dir) / default_name
    history = trainer(cfg, train_records, val_records, ckpt)
    print(f"best epoch {history['best_epoch']}, "
          f"val loss {min(history['val_loss']):.4f}, checkpoint {ckpt}")
    return 0


def cmd_train_seg(args) -> int:
    return _train(args, train_segmentation, "segmenter.pt")


def cmd_train_cls(args) -> int:
    return _train(args, train_classifier, "stager.pt")


def cmd_infer(args) -> int:
    out = args.out or cache_dir() / "inference"
    report = infer(args.ct, args.seg_ckpt, args.cls_ckpt, out, case_id=args.case_id)
    print(json.dumps(report, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    records = read_manifest(args.manifest)
    results = evaluate(records, args.pred, surface=not args.no_surface)
    out = args.out or (Path(args.pred) / "metrics.json")
    atomic_write_json(results, out)
    print(f"wrote metrics for {len(records)} cases to {out}")
    return 0


def cmd_report(args) -> int:
    results = json.loads(Path(args.metrics).read_text())
    summary = {"surfaces": summarize_metrics(results["cases"]),
               "staging": results.get("staging", {})}
    if args.out:
        atomic_write_json(summary, args.out)
    print(json.dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shoulderct",
                                     description="Shoulder CT analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    phantom = sub.add_parser("phantom", help="synthetic data")
    phantom_sub = phantom.add_subparsers(dest="subcommand", required=True)
    gen = phantom_sub.add_parser("generate", help="generate a stratified cohort")
    gen.add_argument("--n", type=int, default=30)
    gen.add_argument("--spacing", type=float, default=1.0)
    gen.add_argument("--noise-std", type=float, default=25.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path)
    gen.set_defaults(func=cmd_phantom_generate)

    train = sub.add_parser("train", help="train a network")
    train_sub = train.add_subparsers(dest="subcommand", required=True)
    for name, func in (("seg", cmd_train_seg), ("cls", cmd_train_cls)):
        tp = train_sub.add_parser(name)
        tp.add_argument("--manifest", required=True, type=Path)
        tp.add_argument("--val-fraction", type=float, default=0.2)
        _add_common(tp)
        tp.set_defaults(func=func)

    inf = sub.add_parser("infer", help="run the cascade on one CT volume")
    inf.add_argument("--ct", required=True, type=Path)
    inf.add_argument("--seg-ckpt", required=True, type=Path)
    inf.add_argument("--cls-ckpt", required=True, type=Path)
    inf.add_argument("--case-id")
    _add_common(inf)
    inf.set_defaults(func=cmd_infer)

    ev = sub.add_parser("evaluate", help="score predictions against a manifest")
    ev.add_argument("--manifest", required=True, type=Path)
    ev.add_argument("--pred", required=True, type=Path)
    ev.add_argument("--no-surface", action="store_true",
                    help="skip mesh distance metrics")
    _add_common(ev)
    ev.set_defaults(func=cmd_evaluate)

    rep = sub.add_parser("report", help="summarize an evaluation JSON")
    rep.add_argument("--metrics", required=True, type=Path)
    rep.add_argument("--out", type=Path)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
