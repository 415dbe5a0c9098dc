"""Nonparametric paired comparisons: Friedman, Wilcoxon signed-rank, Bonferroni.

The Wilcoxon p-value is exact for small samples: the sign-flip distribution
of the positive rank sum is built by dynamic programming over doubled
midranks (doubling keeps tied midranks integral), which matches full 2^n
enumeration bit for bit while staying polynomial.  Larger samples use the
tie-corrected normal approximation with continuity correction.  Zero
differences are dropped before ranking (Wilcoxon's original convention).
"""

from __future__ import annotations

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .errors import DegeneratePairs, PairingError

EXACT_LIMIT = 15  # sign-flip distribution is exact up to this many pairs


def friedman_test(groups) -> dict[str, float]:
    """Friedman rank test over k >= 3 paired groups.

    Returns the tie-corrected chi-square statistic and its p-value with
    k - 1 degrees of freedom.  When every subject's values are fully tied the
    statistic is 0 and p is 1.
    """
    data = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(data)
    if k < 3:
        raise PairingError(f"need at least 3 groups, got {k}")
    n = len(data[0])
    if any(len(g) != n for g in data):
        raise PairingError("groups must be paired: equal lengths required")
    if n < 2:
        raise PairingError(f"need at least 2 subjects, got {n}")

    table = np.column_stack(data)              # (n subjects, k treatments)
    ranks = np.apply_along_axis(rankdata, 1, table)
    rank_sums = ranks.sum(axis=0)
    chi = (12.0 / (n * k * (k + 1))) * (rank_sums ** 2).sum() - 3.0 * n * (k + 1)

    # tie correction: per subject, sum of t^3 - t over tie groups
    ties = 0.0
    for row in table:
        _, counts = np.unique(row, return_counts=True)
        ties += float((counts ** 3 - counts).sum())
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 0:
        return {"statistic": 0.0, "p": 1.0}
    stat = chi / correction
    return {"statistic": float(stat), "p": float(chi2.sf(stat, k - 1))}


def _signed_rank_sums(a, b):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    if len(d) == 0:
        raise DegeneratePairs("all paired differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    return ranks, w_plus, w_minus


def exact_signed_rank_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided exact p for the min rank sum ``w`` by DP over sign flips."""
    doubled = np.round(2 * np.asarray(ranks)).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    threshold = int(np.floor(2 * w + 1e-9))
    p_low = counts[: threshold + 1].sum() / counts.sum()
    return float(min(1.0, 2.0 * p_low))


def wilcoxon_signed_rank(a, b) -> dict[str, float]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    ``statistic`` is the smaller signed-rank sum.  Exact p for up to
    ``EXACT_LIMIT`` nonzero pairs, tie-corrected normal approximation with
    continuity correction beyond.
    """
    if len(a) != len(b):
        raise PairingError(f"{len(a)} vs {len(b)} samples")
    ranks, w_plus, w_minus = _signed_rank_sums(a, b)
    w = min(w_plus, w_minus)
    n = len(ranks)
    if n <= EXACT_LIMIT:
        p = exact_signed_rank_p(ranks, w)
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts ** 3 - tie_counts).sum()) / 48.0
        z = (w - mean + 0.5) / np.sqrt(var)
        p = float(min(1.0, 2.0 * norm.cdf(z)))
    return {"statistic": float(w), "p": p, "n": n}


def bonferroni(p_values, m: int | None = None) -> np.ndarray:
    """Multiply p-values by the comparison count and clamp at 1."""
    p = np.asarray(p_values, dtype=np.float64)
    m = len(p) if m is None else int(m)
    if m < 1:
        raise ValueError("comparison count must be positive")
    return np.minimum(1.0, m * p)
