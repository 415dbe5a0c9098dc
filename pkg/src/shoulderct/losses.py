"""Training objectives for the dual-branch segmenter and the staging classifier.

The region branch is driven by soft Dice mixed with a distance-weighted
cross-entropy whose per-voxel weights grow exponentially toward label
boundaries (``1 + gamma * exp(-EDT / sigma)``).  The contour branch is a
balanced edge-detection objective.  The two branch losses are blended by an
epoch-dependent weight so edges dominate early training and regions dominate
convergence.

All differentiable losses operate on torch tensors shaped ``(C, X, Y, Z)`` or
``(B, C, X, Y, Z)`` and reduce to scalars with fixed summation order so
repeated evaluation is bit-reproducible.  Weight maps and class weights are
plain numpy, computed once per patch or per dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .edt import class_boundary, exact_edt
from .errors import DegenerateClass, ShapeError


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters of the segmentation objective.

    ``gamma``/``sigma`` shape the boundary weight map, ``alpha`` mixes Dice
    against weighted cross-entropy in the region loss, and the contour branch
    weight decays linearly from ``ca_weight_start`` at epoch 0 to
    ``ca_weight_end`` at the final epoch.
    """

    gamma: float = 8.0
    sigma: float = 10.0
    alpha: float = 0.5
    epsilon: float = 1e-7
    ca_weight_start: float = 0.5
    ca_weight_end: float = 0.2

    def __post_init__(self):
        if self.gamma <= 0 or self.sigma <= 0 or self.epsilon <= 0:
            raise ValueError("gamma, sigma, epsilon must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for w in (self.ca_weight_start, self.ca_weight_end):
            if not 0.0 <= w <= 1.0:
                raise ValueError("branch weights must lie in [0, 1]")


# ---------------------------------------------------------------------------
# boundary weight maps (numpy, precomputed per patch)
# ---------------------------------------------------------------------------

def distance_weight_map(edt_map: np.ndarray, gamma: float, sigma: float) -> np.ndarray:
    """``1 + gamma * exp(-EDT / sigma)``: boundary voxels get ``1 + gamma``,
    deep-interior voxels decay toward 1."""
    edt_map = np.asarray(edt_map, dtype=np.float64)
    if (edt_map < 0).any():
        raise ValueError("EDT map must be non-negative")
    return 1.0 + gamma * np.exp(-edt_map / sigma)


def weight_map_stack(labels: np.ndarray, n_classes: int, cfg: LossConfig) -> np.ndarray:
    """Per-class distance weight maps, shape ``(C, X, Y, Z)``.

    Classes absent from this patch get a flat map of ones: they contribute no
    boundary and should not skew the cross-entropy.
    """
    maps = np.ones((n_classes,) + labels.shape, dtype=np.float64)
    for c in range(n_classes):
        if (labels == c).any():
            maps[c] = distance_weight_map(exact_edt(labels, c), cfg.gamma, cfg.sigma)
    return maps


def edge_target_stack(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-class binary boundary masks (morphological gradient, 6-neighborhood)."""
    edges = np.zeros((n_classes,) + labels.shape, dtype=np.float32)
    for c in range(n_classes):
        edges[c] = class_boundary(labels, c)
    return edges


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """One-hot encode an integer label array to shape ``(C, X, Y, Z)``."""
    out = np.zeros((n_classes,) + labels.shape, dtype=np.float32)
    for c in range(n_classes):
        out[c] = labels == c
    return out


# ---------------------------------------------------------------------------
# differentiable losses (torch)
# ---------------------------------------------------------------------------

def _as_batched(*tensors: torch.Tensor) -> list[torch.Tensor]:
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ShapeError(f"loss arguments disagree: {tuple(t.shape)} vs {tuple(shape)}")
    if tensors[0].dim() == 4:
        return [t.unsqueeze(0) for t in tensors]
    if tensors[0].dim() == 5:
        return list(tensors)
    raise ShapeError(f"expected (C,X,Y,Z) or (B,C,X,Y,Z), got {tuple(shape)}")


def weighted_cross_entropy(
    y: torch.Tensor,
    probs: torch.Tensor,
    weight_maps: torch.Tensor,
    epsilon: float = 1e-7,
) -> torch.Tensor:
    """Distance-weighted cross-entropy, normalized by voxel count.

    ``-(1/N) * sum_c sum_N w_c * y_c * log(p_c + eps)`` where ``w_c`` is the
    per-class boundary weight map.
    """
    y, probs, weight_maps = _as_batched(y, probs, weight_maps)
    n_voxels = y.shape[0] * y.shape[2] * y.shape[3] * y.shape[4]
    terms = weight_maps * y * torch.log(probs + epsilon)
    return -terms.sum() / n_voxels


def soft_dice(
    y: torch.Tensor,
    probs: torch.Tensor,
    epsilon: float = 1e-7,
    foreground_only: bool = True,
) -> torch.Tensor:
    """Soft Dice similarity averaged over (foreground) classes, in [0, 1]."""
    y, probs = _as_batched(y, probs)
    start = 1 if foreground_only and y.shape[1] > 1 else 0
    y = y[:, start:]
    probs = probs[:, start:]
    dims = (0, 2, 3, 4)
    inter = (y * probs).sum(dim=dims)
    denom = y.sum(dim=dims) + probs.sum(dim=dims)
    return ((2.0 * inter + epsilon) / (denom + epsilon)).mean()


def region_loss(
    y: torch.Tensor,
    probs: torch.Tensor,
    weight_maps: torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    """Region-branch loss: ``alpha * (1 - Dice) + (1 - alpha) * C_w``.

    Vanishes at perfect prediction; ``alpha = 1`` reduces to ``1 - Dice``.
    """
    d = soft_dice(y, probs, cfg.epsilon)
    cw = weighted_cross_entropy(y, probs, weight_maps, cfg.epsilon)
    return cfg.alpha * (1.0 - d) + (1.0 - cfg.alpha) * cw


def _balanced_bce(edge_y: torch.Tensor, edge_p: torch.Tensor, epsilon: float) -> torch.Tensor:
    pos = edge_y.sum()
    total = edge_y.numel()
    neg = total - pos
    log_p = torch.log(edge_p + epsilon)
    log_np = torch.log(1.0 - edge_p + epsilon)
    if pos == 0:
        return -(log_np.mean())
    beta = neg / total
    pos_term = (edge_y * log_p).sum() / pos
    neg_term = ((1.0 - edge_y) * log_np).sum() / neg
    return -(beta * pos_term + (1.0 - beta) * neg_term)


def contour_loss(
    edge_y: torch.Tensor,
    edge_probs: torch.Tensor,
    epsilon: float = 1e-7,
) -> torch.Tensor:
    """Contour-branch loss: balanced BCE plus (1 - soft Dice) on per-class
    edge maps, averaged over classes."""
    edge_y, edge_probs = _as_batched(edge_y, edge_probs)
    n_classes = edge_y.shape[1]
    per_class = []
    for c in range(n_classes):
        yc = edge_y[:, c]
        pc = edge_probs[:, c]
        bce = _balanced_bce(yc, pc, epsilon)
        inter = (yc * pc).sum()
        dice = (2.0 * inter + epsilon) / (yc.sum() + pc.sum() + epsilon)
        per_class.append(bce + (1.0 - dice))
    return torch.stack(per_class).mean()


def branch_weight(epoch: int, max_epochs: int, start: float = 0.5, end: float = 0.2) -> float:
    """Contour-branch weight: linear from ``start`` at epoch 0 to ``end`` at
    the final epoch."""
    if max_epochs <= 1:
        return end
    t = min(max(epoch / (max_epochs - 1), 0.0), 1.0)
    return start + t * (end - start)


def total_loss(
    ra: torch.Tensor,
    ca: torch.Tensor,
    epoch: int,
    max_epochs: int,
    cfg: LossConfig,
) -> torch.Tensor:
    """Blend region and contour losses with the epoch schedule."""
    w = branch_weight(epoch, max_epochs, cfg.ca_weight_start, cfg.ca_weight_end)
    return (1.0 - w) * ra + w * ca


# ---------------------------------------------------------------------------
# classification objectives
# ---------------------------------------------------------------------------

def class_weights(counts) -> np.ndarray:
    """Inverse-frequency class weights ``(1/N_c) / sum_i(1/N_i)``; sums to 1."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts <= 0).any():
        raise DegenerateClass(f"non-positive class count in {counts}")
    inv = 1.0 / counts
    return inv / inv.sum()


def task_cross_entropy(
    y: torch.Tensor,
    probs: torch.Tensor,
    weights: torch.Tensor | np.ndarray,
    epsilon: float = 1e-7,
) -> torch.Tensor:
    """Class-weighted categorical cross-entropy over a batch.

    ``y`` and ``probs`` are ``(B, C)``; ``weights`` has one entry per class.
    """
    if y.shape != probs.shape:
        raise ShapeError(f"labels {tuple(y.shape)} vs probs {tuple(probs.shape)}")
    if y.dim() == 1:
        y = y.unsqueeze(0)
        probs = probs.unsqueeze(0)
    w = torch.as_tensor(np.asarray(weights), dtype=probs.dtype, device=probs.device)
    if w.numel() != y.shape[1]:
        raise ShapeError(f"{w.numel()} weights for {y.shape[1]} classes")
    per_sample = -(w * y * torch.log(probs + epsilon)).sum(dim=1)
    return per_sample.mean()
