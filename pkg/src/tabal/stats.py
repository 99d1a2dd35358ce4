"""Paired nonparametric significance testing and FDR control.

The signed-rank test enumerates all sign assignments exactly (tie-aware) up
to EXACT_LIMIT pairs and falls back to a tie- and continuity-corrected normal
approximation above that.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ._util import rankdata

#: Largest number of nonzero differences handled by exact enumeration.
EXACT_LIMIT = 12


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """Two-sided paired Wilcoxon signed-rank test.

    Returns (W, p) where W = min(W+, W-) over the nonzero differences a - b
    with average ranks for tied magnitudes. Zero differences are dropped; if
    every difference is zero, p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 0.0, 1.0
    ranks = rankdata(np.abs(d))
    w_pos = float(ranks[d > 0].sum())
    w_neg = float(ranks[d < 0].sum())
    w = min(w_pos, w_neg)
    if n <= EXACT_LIMIT:
        p = _exact_two_sided(ranks, w)
    else:
        p = _normal_two_sided(ranks, w, n)
    return w, p


def _exact_two_sided(ranks: np.ndarray, w_obs: float) -> float:
    """P(min(W+, W-) <= w_obs) over all 2^n equally likely sign patterns."""
    total = float(ranks.sum())
    hits = 0
    for signs in itertools.product((0.0, 1.0), repeat=ranks.size):
        w_pos = float(np.dot(ranks, signs))
        if min(w_pos, total - w_pos) <= w_obs + 1e-9:
            hits += 1
    return hits / 2.0 ** ranks.size


def _normal_two_sided(ranks: np.ndarray, w: float, n: int) -> float:
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var -= float((tie_sizes**3 - tie_sizes).sum()) / 48.0
    if var <= 0:
        return 1.0
    z = (w - mu + 0.5) / math.sqrt(var)  # continuity correction toward the mean
    p = 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0))
    return min(1.0, p)


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order.

    adj_(i) = min_{j >= i} p_(j) * m / j over the ascending order, clamped to
    at most 1. Comparing the output against a threshold reproduces the
    step-up rejection set at that level.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a flat vector of p-values")
    if ((p < 0) | (p > 1)).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m, dtype=float)
    out[order] = adjusted
    return out
