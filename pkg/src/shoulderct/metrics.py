"""Voxel-overlap and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelError, ShapeError, UndefinedMetric


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or (c < 0).any():
            raise ValueError(f"invalid confusion counts shape {c.shape}")
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Row-normalized matrix (per-class recall breakdown)."""
        row = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return self.counts / np.where(row > 0, row, 1.0)


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def overlap_metrics(y: np.ndarray, yhat: np.ndarray, class_id: int) -> dict[str, float]:
    """Dice, Jaccard, precision, recall for one class of a voxel mask pair."""
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape:
        raise ShapeError(f"truth {y.shape} vs prediction {yhat.shape}")
    t = y == class_id
    p = yhat == class_id
    if not t.any() and not p.any():
        raise UndefinedMetric(f"class {class_id} absent from truth and prediction")
    tp = int((t & p).sum())
    fp = int((~t & p).sum())
    fn = int((t & ~p).sum())
    return {
        "dice": _safe_div(2 * tp, 2 * tp + fp + fn),
        "jaccard": _safe_div(tp, tp + fp + fn),
        "precision": _safe_div(tp, tp + fp),
        "recall": _safe_div(tp, tp + fn),
    }


def confusion_matrix(true, pred, n_classes: int) -> ConfusionMatrix:
    true = np.asarray(true, dtype=np.int64).reshape(-1)
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    if true.shape != pred.shape:
        raise ShapeError(f"{len(true)} truths vs {len(pred)} predictions")
    for arr, name in ((true, "true"), (pred, "pred")):
        if len(arr) and (arr.min() < 0 or arr.max() >= n_classes):
            raise LabelError(f"{name} labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts)


def classification_report(true, pred, n_classes: int) -> dict:
    """Accuracy plus macro-averaged precision/recall/F1 and the confusion matrix."""
    cm = confusion_matrix(true, pred, n_classes)
    counts = cm.counts
    accuracy = _safe_div(np.trace(counts), counts.sum())
    precision, recall, f1 = [], [], []
    for c in range(n_classes):
        p = _safe_div(counts[c, c], counts[:, c].sum())
        r = _safe_div(counts[c, c], counts[c, :].sum())
        precision.append(p)
        recall.append(r)
        f1.append(_safe_div(2 * p * r, p + r))
    return {
        "accuracy": accuracy,
        "precision": float(np.mean(precision)),
        "recall": float(np.mean(recall)),
        "f1": float(np.mean(f1)),
        "per_class_precision": precision,
        "per_class_recall": recall,
        "confusion": cm,
    }
