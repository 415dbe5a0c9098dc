"""End-to-end pipeline checks on a miniature phantom cohort.

The module-scoped fixture trains deliberately tiny networks for two epochs;
these tests exercise the plumbing contracts (schemas, determinism, timing
bookkeeping, error paths), not model quality, which the acceptance suite
covers at full scale.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from shoulderct.config import ExperimentConfig
from shoulderct.errors import DataError, PairingError, PipelineError
from shoulderct.losses import class_weights
from shoulderct.networks import SegmenterConfig, StagingConfig
from shoulderct.nifti import read_labelmap
from shoulderct.phantom import generate_cohort
from shoulderct.pipeline import (
    _classification_samples,
    evaluate,
    infer,
    summarize_metrics,
    train_classifier,
    train_segmentation,
    validate_report,
)
from shoulderct import cli


def tiny_config(**overrides) -> ExperimentConfig:
    base = dict(
        seed=1,
        learning_rate=1e-3,
        batch_size=2,
        max_epochs=2,
        early_stopping_patience=5,
        patch_size=32,
        patch_stride=24,
        crop_margin=4,
        segmenter=SegmenterConfig(levels=2, base_features=4),
        stager=StagingConfig(blocks=3, base_features=4, input_size=32),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipeline")
    manifest = generate_cohort(20, tmp / "cohort", seed=0, spacing=1.25)
    cfg = tiny_config()
    train_segmentation(cfg, manifest[:4], manifest[18:], tmp / "seg.pt")
    train_classifier(cfg, manifest[:18], manifest[18:], tmp / "cls.pt")
    reports = {}
    for rec in manifest[18:]:
        reports[rec["id"]] = infer(
            rec["volume_path"], tmp / "seg.pt", tmp / "cls.pt", tmp / "pred",
            case_id=rec["id"],
        )
    return {"tmp": tmp, "manifest": manifest, "cfg": cfg, "reports": reports}


def test_report_schema_and_simplex(trained):
    for report in trained["reports"].values():
        validate_report(report)
        for task, n in (("os", 3), ("js", 3), ("hsa", 2)):
            assert len(report["probs"][task]) == n
            assert sum(report["probs"][task]) == pytest.approx(1.0, abs=1e-5)


def test_stage_timings_sum_to_overall(trained):
    for report in trained["reports"].values():
        t = report["timings_s"]
        stages = t["segmentation"] + t["reconstruction"] + t["classification"]
        assert stages == pytest.approx(t["overall"], rel=0.05)
        assert t["overall"] >= max(t.values()) - 1e-9


def test_cascade_rerun_is_bit_identical(trained):
    tmp = trained["tmp"]
    rec = trained["manifest"][18]
    first = trained["reports"][rec["id"]]
    rerun_dir = tmp / "rerun"
    again = infer(rec["volume_path"], tmp / "seg.pt", tmp / "cls.pt", rerun_dir,
                  case_id=rec["id"])
    assert (first["os"], first["js"], first["hsa"]) == (again["os"], again["js"], again["hsa"])
    assert first["probs"] == again["probs"]
    a = read_labelmap(tmp / "pred" / f"{rec['id']}_labels.nii.gz")
    b = read_labelmap(rerun_dir / f"{rec['id']}_labels.nii.gz")
    assert np.array_equal(a.data, b.data)


def test_training_seeded_first_epoch_reproducible(trained):
    tmp = trained["tmp"]
    manifest = trained["manifest"]
    cfg = tiny_config(max_epochs=1)
    h1 = train_segmentation(cfg, manifest[:2], manifest[18:19], tmp / "r1.pt")
    h2 = train_segmentation(cfg, manifest[:2], manifest[18:19], tmp / "r2.pt")
    assert h1["train_loss"][0] == pytest.approx(h2["train_loss"][0], abs=1e-6)


def test_early_stopping_patience_one(trained):
    tmp = trained["tmp"]
    manifest = trained["manifest"]
    # lr=0 freezes the model: no epoch can improve on the first
    cfg = tiny_config(learning_rate=1e-30, max_epochs=6, early_stopping_patience=1)
    hist = train_segmentation(cfg, manifest[:2], manifest[18:19], tmp / "es.pt")
    assert len(hist["val_loss"]) <= hist["best_epoch"] + 2


def test_flip_augmentation_doubles_training_set(trained):
    cfg = trained["cfg"]
    records = trained["manifest"][:3]
    xs, ys = _classification_samples(records, cfg, augment=True)
    assert len(xs) == 2 * len(records)
    assert ys[0] == ys[1]
    assert np.array_equal(xs[1], np.flip(xs[0], axis=0))


def test_recorded_class_weights_match_formula(trained):
    tmp = trained["tmp"]
    history = json.loads((tmp / "cls.log.json").read_text())
    train_y = [(r["os"], r["js"], r["hsa"]) for r in trained["manifest"][:18]]
    for t, n in ((0, 3), (1, 3), (2, 2)):
        counts = np.bincount([y[t] for y in train_y], minlength=n)
        assert np.allclose(history["class_weights"][t], class_weights(counts))


def test_infer_no_humerus_raises(trained, monkeypatch):
    from shoulderct import pipeline as pl
    from shoulderct.volume import LabelMap

    def background_only(net, vol, patch, stride):
        return LabelMap(data=np.zeros(vol.shape, dtype=np.uint8),
                        spacing=vol.spacing, origin=vol.origin)

    monkeypatch.setattr(pl, "segment_volume", background_only)
    rec = trained["manifest"][18]
    with pytest.raises(PipelineError):
        pl.infer(rec["volume_path"], trained["tmp"] / "seg.pt",
                 trained["tmp"] / "cls.pt", trained["tmp"] / "err")


def test_empty_manifest_raises(trained):
    with pytest.raises(DataError):
        train_segmentation(trained["cfg"], [], [], trained["tmp"] / "x.pt")


def test_evaluate_missing_case_raises(trained):
    with pytest.raises(PairingError):
        evaluate(trained["manifest"][:1], trained["tmp"] / "pred")


def test_evaluate_perfect_predictions(trained, tmp_path):
    """Truth copied as prediction: overlap metrics exactly 1, surfaces sub-voxel."""
    import shutil

    from shoulderct.marching import marching_cubes
    from shoulderct.mesh import write_stl

    rec = trained["manifest"][18]
    pred_dir = tmp_path / "perfect"
    pred_dir.mkdir()
    shutil.copy(rec["label_path"], pred_dir / f"{rec['id']}_labels.nii.gz")
    lab = read_labelmap(rec["label_path"])
    for class_id, name in ((1, "humerus"), (2, "scapula")):
        mesh = marching_cubes((lab.data == class_id).astype(float), 0.5,
                              lab.spacing, lab.origin)
        write_stl(mesh, pred_dir / f"{rec['id']}_{name}.stl")
    report = dict(trained["reports"][rec["id"]])
    report.update({"os": rec["os"], "js": rec["js"], "hsa": rec["hsa"]})
    (pred_dir / f"{rec['id']}_report.json").write_text(json.dumps(report))

    results = evaluate([rec], pred_dir)
    for row in results["cases"]:
        assert row["dice"] == 1.0 and row["jaccard"] == 1.0
        assert row["precision"] == 1.0 and row["recall"] == 1.0
        assert row["rmse_mm"] < rec["spec"]["spacing"]
    for task in ("os", "js", "hsa"):
        assert results["staging"][task]["accuracy"] == 1.0


def test_training_loss_improves(trained):
    log = json.loads((trained["tmp"] / "seg.log.json").read_text())
    assert min(log["val_loss"]) < log["val_loss"][0] or log["best_epoch"] == 0
    assert log["train_loss"][-1] < log["train_loss"][0]


def test_compare_prediction_sets_protocol():
    from shoulderct.pipeline import compare_prediction_sets

    g = np.random.default_rng(4)
    base = g.normal(size=15)
    sets = {"a": (base + 1.0).tolist(), "b": base.tolist(), "c": (base - 0.5).tolist()}
    out = compare_prediction_sets(sets)
    assert "friedman" in out and out["friedman"]["p"] < 0.05
    assert len(out["pairwise"]) == 3
    for pair in out["pairwise"]:
        assert pair["p_adjusted"] >= pair["p"]
        assert pair["p_adjusted"] <= 1.0


def test_summarize_metrics_median_iqr():
    rows = [
        {"case_id": "a", "class": "humerus", "dice": 0.9, "jaccard": 0.8,
         "precision": 0.9, "recall": 0.9, "rmse_mm": 0.5, "hausdorff_mm": 2.0},
        {"case_id": "b", "class": "humerus", "dice": 1.0, "jaccard": 1.0,
         "precision": 1.0, "recall": 1.0, "rmse_mm": 0.3, "hausdorff_mm": 1.0},
    ]
    summary = summarize_metrics(rows)
    assert summary["humerus"]["dice"]["median"] == pytest.approx(0.95)


def test_cli_phantom_generate_and_report(tmp_path, capsys):
    assert cli.main(["phantom", "generate", "--n", "2", "--seed", "3",
                     "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "manifest.jsonl").exists()
    metrics = {"cases": [{"case_id": "a", "class": "humerus", "dice": 0.9,
                          "jaccard": 0.8, "precision": 0.9, "recall": 0.95,
                          "rmse_mm": 0.4, "hausdorff_mm": 1.5}],
               "staging": {}}
    mpath = tmp_path / "metrics.json"
    mpath.write_text(json.dumps(metrics))
    assert cli.main(["report", "--metrics", str(mpath)]) == 0
    out = capsys.readouterr().out
    assert "humerus" in out
