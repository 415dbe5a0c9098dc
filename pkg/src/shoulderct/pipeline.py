"""Orchestration: training harnesses, cascaded inference, and evaluation.

Inference runs the full cascade on one CT volume: normalize, sliding-window
segmentation with overlap averaging, marching-cubes reconstruction of both
bones, sphere-fit joint localization, and multi-task staging on the
joint-centered patch.  Per-stage wall-clock timings are recorded; outputs are
written atomically (temp file + rename) so an interrupted run never leaves a
truncated report behind.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import ExperimentConfig
from .errors import DataError, PairingError, PipelineError
from .ghjoint import fit_humeral_head, gh_bounding_box
from .losses import (
    class_weights,
    contour_loss,
    edge_target_stack,
    one_hot,
    region_loss,
    task_cross_entropy,
    total_loss,
    weight_map_stack,
)
from .marching import marching_cubes
from .mesh import TriMesh, read_stl, write_stl
from .metrics import classification_report, overlap_metrics
from .meshdist import hausdorff, surface_rmse
from .networks import (
    DualDecoderUNet3D,
    MultiTaskStagingNet,
    TASKS,
    forward_cls,
    forward_seg,
    load_checkpoint,
    save_checkpoint,
)
from .nifti import read_labelmap, read_volume, write_labelmap
from .stats import bonferroni, friedman_test, wilcoxon_signed_rank
from .volume import (
    HUMERUS,
    SCAPULA,
    LabelMap,
    Volume,
    crop_to_foreground,
    extract_patch,
    make_patch_grid,
    merge_patches,
    normalize_hu,
)


@dataclass(frozen=True)
class StagingResult:
    os: int
    js: int
    hsa: int
    probs: dict[str, list[float]]
    gh_box: list[int]
    timings_s: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# atomic output writing
# ---------------------------------------------------------------------------

def atomic_write_json(payload: dict, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2) + "\n")
    os.replace(tmp, path)


REPORT_SCHEMA = {
    "case_id": str,
    "os": int,
    "js": int,
    "hsa": int,
    "probs": dict,
    "gh_box": list,
    "timings_s": dict,
    "versions": dict,
}


def validate_report(report: dict) -> None:
    """Raise if a staging report deviates from the published schema."""
    for key, kind in REPORT_SCHEMA.items():
        if key not in report:
            raise PipelineError("report", f"missing key {key}")
        if not isinstance(report[key], kind):
            raise PipelineError("report", f"{key} must be {kind.__name__}")
    for task, n in zip(TASKS, (3, 3, 2)):
        probs = report["probs"].get(task)
        if probs is None or len(probs) != n:
            raise PipelineError("report", f"probs[{task}] must have {n} entries")
        if abs(sum(probs) - 1.0) > 1e-5:
            raise PipelineError("report", f"probs[{task}] not on the simplex")
    for stage in ("segmentation", "reconstruction", "classification", "overall"):
        if stage not in report["timings_s"]:
            raise PipelineError("report", f"missing timing {stage}")


# ---------------------------------------------------------------------------
# training data preparation
# ---------------------------------------------------------------------------

def _load_case(record: dict) -> tuple[Volume, LabelMap]:
    vol = read_volume(record["volume_path"])
    lab = read_labelmap(record["label_path"])
    return normalize_hu(vol), lab


def _segmentation_samples(records, cfg: ExperimentConfig, with_weights: bool = True):
    """Per-patch tensors: intensities, labels, edge targets, boundary weights."""
    samples = []
    for record in records:
        vol, lab = _load_case(record)
        vol, lab = crop_to_foreground(vol, lab, margin=cfg.crop_margin)
        grid = make_patch_grid(lab.shape, cfg.patch_size, cfg.patch_stride)
        for corner in grid.offsets:
            x = extract_patch(vol.data, corner, grid.patch_size).astype(np.float32)
            y = extract_patch(lab.data, corner, grid.patch_size).astype(np.int64)
            sample = {"x": x, "y": y.astype(np.uint8)}
            if with_weights:
                n_cls = cfg.segmenter.out_classes
                sample["dwm"] = weight_map_stack(y, n_cls, cfg.loss).astype(np.float32)
                sample["edges"] = edge_target_stack(y, n_cls).astype(np.uint8)
            samples.append(sample)
    if not samples:
        raise DataError("manifest produced no training patches")
    return samples


def _seg_batch(samples, idx, n_classes, device):
    xs = torch.stack([torch.from_numpy(samples[i]["x"]) for i in idx])[:, None]
    ys = torch.stack([
        torch.from_numpy(one_hot(samples[i]["y"].astype(np.int64), n_classes)) for i in idx
    ])
    dwm = torch.stack([torch.from_numpy(samples[i]["dwm"]) for i in idx])
    edges = torch.stack([
        torch.from_numpy(samples[i]["edges"].astype(np.float32)) for i in idx
    ])
    return (t.to(device) for t in (xs, ys, dwm, edges))


def _epoch_loss(net, samples, order, cfg, epoch, optimizer=None):
    device = cfg.device
    n_cls = cfg.segmenter.out_classes
    total, count = 0.0, 0
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start: start + cfg.batch_size]
        xs, ys, dwm, edges = _seg_batch(samples, idx, n_cls, device)
        if optimizer is not None:
            optimizer.zero_grad()
        region, edge_probs = net(xs)
        ra = region_loss(ys, region, dwm, cfg.loss)
        ca = contour_loss(edges, edge_probs, cfg.loss.epsilon)
        loss = total_loss(ra, ca, epoch, cfg.max_epochs, cfg.loss)
        if optimizer is not None:
            loss.backward()
            optimizer.step()
        total += float(loss.item()) * len(idx)
        count += len(idx)
    return total / count


def train_segmentation(
    cfg: ExperimentConfig,
    train_records: list[dict],
    val_records: list[dict],
    ckpt_path: str | Path,
) -> dict:
    """Adam training of the dual-branch segmenter with early stopping.

    Returns the training history; the best-validation checkpoint and a JSON
    log land next to ``ckpt_path``.
    """
    if not train_records or not val_records:
        raise DataError("need non-empty train and validation manifests")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    net = DualDecoderUNet3D(cfg.segmenter).to(cfg.device)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

    train_samples = _segmentation_samples(train_records, cfg)
    val_samples = _segmentation_samples(val_records, cfg)

    history = {"train_loss": [], "val_loss": [], "best_epoch": 0}
    best_val = float("inf")
    best_state = None
    since_best = 0
    for epoch in range(cfg.max_epochs):
        net.train()
        order = rng.permutation(len(train_samples))
        train_l = _epoch_loss(net, train_samples, order, cfg, epoch, optimizer)
        net.eval()
        with torch.no_grad():
            val_l = _epoch_loss(net, val_samples, np.arange(len(val_samples)), cfg, epoch)
        history["train_loss"].append(train_l)
        history["val_loss"].append(val_l)
        if val_l < best_val - 1e-12:
            best_val = val_l
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
            history["best_epoch"] = epoch
            since_best = 0
        else:
            since_best += 1
        if since_best >= cfg.early_stopping_patience:
            break
    if best_state is not None:
        net.load_state_dict(best_state)
    ckpt_path = Path(ckpt_path)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        ckpt_path, net, optimizer, epoch=history["best_epoch"],
        extra={"history": history, "patch_size": cfg.patch_size,
               "patch_stride": cfg.patch_stride},
    )
    atomic_write_json(history, ckpt_path.with_suffix(".log.json"))
    return history


# ---------------------------------------------------------------------------
# classifier training
# ---------------------------------------------------------------------------

def _gh_patch_from_truth(record: dict, patch: int) -> np.ndarray:
    """Joint-centered intensity patch using the ground-truth segmentation."""
    vol, lab = _load_case(record)
    fit = fit_humeral_head(lab)
    corner = gh_bounding_box(fit, lab, side=vol.laterality, patch=patch)
    return extract_patch(vol.data, corner, (patch,) * 3).astype(np.float32)


def _classification_samples(records, cfg: ExperimentConfig, augment: bool):
    patch = cfg.stager.input_size
    xs, labels = [], []
    for record in records:
        x = _gh_patch_from_truth(record, patch)
        y = (record["os"], record["js"], record["hsa"])
        xs.append(x)
        labels.append(y)
        if augment:
            xs.append(np.flip(x, axis=0).copy())  # sagittal mirror, same grades
            labels.append(y)
    return xs, labels


def train_classifier(
    cfg: ExperimentConfig,
    train_records: list[dict],
    val_records: list[dict],
    ckpt_path: str | Path,
) -> dict:
    """Multi-task training with inverse-frequency class weights and
    sagittal-flip doubling of the training set."""
    if not train_records or not val_records:
        raise DataError("need non-empty train and validation manifests")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    net = MultiTaskStagingNet(cfg.stager).to(cfg.device)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

    train_x, train_y = _classification_samples(train_records, cfg, augment=True)
    val_x, val_y = _classification_samples(val_records, cfg, augment=False)

    n_classes = cfg.stager.head_classes
    counts = [np.bincount([y[t] for y in train_y], minlength=n)
              for t, n in enumerate(n_classes)]
    weights = [class_weights(c) for c in counts]  # DegenerateClass if a class is absent

    def batch_loss(xs_idx, xs, ys):
        x = torch.stack([torch.from_numpy(xs[i]) for i in xs_idx])[:, None].to(cfg.device)
        probs = net(x)
        loss = 0.0
        for t, n in enumerate(n_classes):
            y = torch.zeros(len(xs_idx), n)
            for row, i in enumerate(xs_idx):
                y[row, ys[i][t]] = 1.0
            loss = loss + task_cross_entropy(y.to(cfg.device), probs[t], weights[t],
                                             cfg.loss.epsilon)
        return loss

    history = {"train_loss": [], "val_loss": [], "best_epoch": 0,
               "class_weights": [w.tolist() for w in weights]}
    best_val = float("inf")
    best_state = None
    since_best = 0
    for epoch in range(cfg.max_epochs):
        net.train()
        order = rng.permutation(len(train_x))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            optimizer.zero_grad()
            loss = batch_loss(idx, train_x, train_y)
            loss.backward()
            optimizer.step()
            total += float(loss.item()) * len(idx)
        history["train_loss"].append(total / len(order))
        net.eval()
        with torch.no_grad():
            val_total = 0.0
            for start in range(0, len(val_x), cfg.batch_size):
                idx = np.arange(start, min(start + cfg.batch_size, len(val_x)))
                val_total += float(batch_loss(idx, val_x, val_y).item()) * len(idx)
        val_l = val_total / len(val_x)
        history["val_loss"].append(val_l)
        if val_l < best_val - 1e-12:
            best_val = val_l
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
            history["best_epoch"] = epoch
            since_best = 0
        else:
            since_best += 1
        if since_best >= cfg.early_stopping_patience:
            break
    if best_state is not None:
        net.load_state_dict(best_state)
    ckpt_path = Path(ckpt_path)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt_path, net, optimizer, epoch=history["best_epoch"],
                    extra={"history": history})
    atomic_write_json(history, ckpt_path.with_suffix(".log.json"))
    return history


# ---------------------------------------------------------------------------
# cascaded inference
# ---------------------------------------------------------------------------

def segment_volume(net: DualDecoderUNet3D, vol: Volume, patch: int, stride: int) -> LabelMap:
    """Sliding-window prediction with deterministic overlap averaging."""
    grid = make_patch_grid(vol.shape, patch, stride)
    pieces = []
    for corner in grid.offsets:
        x = extract_patch(vol.data, corner, grid.patch_size)
        region, _ = forward_seg(net, x)
        pieces.append((corner, region.astype(np.float64)))
    probs = merge_patches(pieces, vol.shape)
    labels = probs.argmax(axis=0).astype(np.uint8)
    return LabelMap(data=labels, spacing=vol.spacing, origin=vol.origin,
                    laterality=vol.laterality)


def infer(
    ct_path: str | Path,
    seg_ckpt: str | Path,
    cls_ckpt: str | Path,
    out_dir: str | Path,
    case_id: str | None = None,
) -> dict:
    """Full cascade on one CT volume; returns the validated report dict.

    Writes ``<case>_labels.nii.gz``, both bone STLs, and ``<case>_report.json``
    into ``out_dir`` atomically.
    """
    ct_path = Path(ct_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    case_id = case_id or ct_path.name.split(".")[0]

    seg_net, seg_payload = load_checkpoint(seg_ckpt)
    cls_net, _ = load_checkpoint(cls_ckpt)
    patch = seg_payload["extra"].get("patch_size", 160)
    stride = seg_payload["extra"].get("patch_stride", max(1, int(patch * 0.75)))
    gh_patch = cls_net.config.input_size

    t0 = time.monotonic()
    raw = read_volume(ct_path)
    vol = normalize_hu(raw)
    pred = segment_volume(seg_net, vol, patch, stride)
    t_seg = time.monotonic()

    if not (pred.data == HUMERUS).any():
        raise PipelineError("NoHumerus", "segmentation produced no humerus voxels")
    meshes = {}
    for name, class_id in (("humerus", HUMERUS), ("scapula", SCAPULA)):
        mask = (pred.data == class_id).astype(np.float64)
        meshes[name] = marching_cubes(mask, iso=0.5, spacing=vol.spacing, origin=vol.origin)
    t_recon = time.monotonic()

    fit = fit_humeral_head(pred)
    corner = gh_bounding_box(fit, pred, side=vol.laterality, patch=gh_patch)
    gh = extract_patch(vol.data, corner, (gh_patch,) * 3)
    probs = forward_cls(cls_net, gh)
    t_cls = time.monotonic()

    timings = {
        "segmentation": t_seg - t0,
        "reconstruction": t_recon - t_seg,
        "classification": t_cls - t_recon,
        "overall": t_cls - t0,
    }
    result = StagingResult(
        os=int(probs["os"].argmax()),
        js=int(probs["js"].argmax()),
        hsa=int(probs["hsa"].argmax()),
        probs={k: [float(p) for p in v] for k, v in probs.items()},
        gh_box=[int(c) for c in corner],
        timings_s=timings,
    )
    report = {
        "case_id": case_id,
        "os": result.os,
        "js": result.js,
        "hsa": result.hsa,
        "probs": result.probs,
        "gh_box": result.gh_box,
        "gh_patch": gh_patch,
        "head_fit": {
            "center": [float(c) for c in fit.center],
            "radius": fit.radius,
            "rms_residual": fit.rms_residual,
        },
        "timings_s": timings,
        "versions": {"shoulderct": __version__, "checkpoint": 1},
    }
    validate_report(report)

    labels_path = out_dir / f"{case_id}_labels.nii.gz"
    tmp = out_dir / f"{case_id}_labels.tmp.nii.gz"
    write_labelmap(pred, tmp)
    os.replace(tmp, labels_path)
    sidecar = tmp.with_name(tmp.name.replace(".tmp.nii.gz", ".tmp.json"))
    if sidecar.exists():
        os.replace(sidecar, out_dir / f"{case_id}_labels.json")
    for name, mesh in meshes.items():
        mesh_path = out_dir / f"{case_id}_{name}.stl"
        tmp = mesh_path.with_suffix(".stl.tmp")
        write_stl(mesh, tmp)
        os.replace(tmp, mesh_path)
    atomic_write_json(report, out_dir / f"{case_id}_report.json")
    return report


# ---------------------------------------------------------------------------
# evaluation harness
# ---------------------------------------------------------------------------

CLASS_NAMES = {HUMERUS: "humerus", SCAPULA: "scapula"}


def _truth_meshes(record: dict, lab: LabelMap) -> dict[str, TriMesh]:
    meshes = {}
    if "morph_stl" in record:
        meshes["humerus"] = read_stl(record["morph_stl"])
    else:
        meshes["humerus"] = marching_cubes((lab.data == HUMERUS).astype(np.float64), 0.5,
                                           lab.spacing, lab.origin)
    meshes["scapula"] = marching_cubes((lab.data == SCAPULA).astype(np.float64), 0.5,
                                       lab.spacing, lab.origin)
    return meshes


def evaluate(truth_records: list[dict], pred_dir: str | Path,
             surface: bool = True) -> dict:
    """Per-case overlap + surface metrics and a staging classification report.

    ``pred_dir`` holds the outputs of :func:`infer` for every case in the
    manifest; a case without predictions raises :class:`PairingError`.
    """
    pred_dir = Path(pred_dir)
    records_out = []
    staging_true = {task: [] for task in TASKS}
    staging_pred = {task: [] for task in TASKS}
    for record in truth_records:
        case_id = record["id"]
        label_path = pred_dir / f"{case_id}_labels.nii.gz"
        report_path = pred_dir / f"{case_id}_report.json"
        if not label_path.exists() or not report_path.exists():
            raise PairingError(f"no prediction for case {case_id}")
        pred_lab = read_labelmap(label_path)
        truth_lab = read_labelmap(record["label_path"])
        report = json.loads(report_path.read_text())
        for task in TASKS:
            staging_true[task].append(record[task])
            staging_pred[task].append(report[task])
        truth_meshes = _truth_meshes(record, truth_lab) if surface else {}
        for class_id, name in CLASS_NAMES.items():
            row = {"case_id": case_id, "class": name}
            row.update(overlap_metrics(truth_lab.data, pred_lab.data, class_id))
            if surface:
                pred_mesh = read_stl(pred_dir / f"{case_id}_{name}.stl")
                row["rmse_mm"] = surface_rmse(pred_mesh, truth_meshes[name])
                row["hausdorff_mm"] = hausdorff(pred_mesh, truth_meshes[name])
            records_out.append(row)

    staging = {}
    for task, n in zip(TASKS, (3, 3, 2)):
        rep = classification_report(staging_true[task], staging_pred[task], n)
        staging[task] = {
            "accuracy": rep["accuracy"],
            "precision": rep["precision"],
            "recall": rep["recall"],
            "f1": rep["f1"],
            "confusion": rep["confusion"].counts.tolist(),
        }
    return {"cases": records_out, "staging": staging}


def compare_prediction_sets(per_set_scores: dict[str, list[float]]) -> dict:
    """Friedman over k sets of paired per-case scores, then pairwise Wilcoxon
    with Bonferroni correction (k >= 3); plain Wilcoxon for k == 2."""
    names = sorted(per_set_scores)
    groups = [per_set_scores[name] for name in names]
    out: dict = {"sets": names}
    if len(names) >= 3:
        out["friedman"] = friedman_test(groups)
    pairs, raw_p = [], []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            res = wilcoxon_signed_rank(groups[i], groups[j])
            pairs.append((names[i], names[j]))
            raw_p.append(res["p"])
    adjusted = bonferroni(raw_p) if raw_p else []
    out["pairwise"] = [
        {"a": a, "b": b, "p": float(p), "p_adjusted": float(q)}
        for (a, b), p, q in zip(pairs, raw_p, adjusted)
    ]
    return out


def summarize_metrics(case_records: list[dict]) -> dict:
    """Median and IQR per class and metric, for the report command."""
    summary: dict = {}
    by_class: dict[str, list[dict]] = {}
    for row in case_records:
        by_class.setdefault(row["class"], []).append(row)
    for name, rows in sorted(by_class.items()):
        summary[name] = {}
        for key in ("dice", "jaccard", "precision", "recall", "rmse_mm", "hausdorff_mm"):
            values = np.asarray([r[key] for r in rows if key in r], dtype=float)
            if len(values) == 0:
                continue
            q1, med, q3 = np.percentile(values, [25, 50, 75])
            summary[name][key] = {"median": float(med), "iqr": [float(q1), float(q3)]}
    return summary
