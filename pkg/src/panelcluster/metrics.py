"""Label-agreement metrics: best-permutation average and perfect match."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import MatchScore


def _confusion(truth, estimate):
    truth = np.asarray(truth, dtype=int)
    estimate = np.asarray(estimate, dtype=int)
    if truth.shape != estimate.shape:
        raise ValueError("labelings must have equal length")
    g_true = truth.max(initial=1)
    g_est = estimate.max(initial=1)
    if truth.min(initial=1) < 1 or estimate.min(initial=1) < 1:
        raise ValueError("labels must be 1-based positive integers")
    G = max(g_true, g_est)
    counts = np.zeros((G, G), dtype=int)
    np.add.at(counts, (truth - 1, estimate - 1), 1)
    return counts, g_true != g_est


def average_match(truth, estimate) -> MatchScore:
    """Fraction of correctly labeled individuals, maximized over bijections
    of the label alphabet (solved as a maximum-weight assignment).

    Alphabets of different sizes are padded with empty groups and flagged.
    """
    counts, padded = _confusion(truth, estimate)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    n = len(np.asarray(truth))
    average = float(counts[rows, cols].sum() / n)
    mapping = {int(r) + 1: int(c) + 1 for r, c in zip(rows, cols)}
    return MatchScore(perfect=average == 1.0, average=average,
                      best_permutation=mapping, padded=padded)


def perfect_match(truth, estimate) -> bool:
    """True iff the partitions agree exactly up to label permutation."""
    return average_match(truth, estimate).perfect
