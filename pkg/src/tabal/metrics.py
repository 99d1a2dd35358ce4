"""Evaluation metrics: Cohen's kappa, one-vs-rest macro ROC AUC, and the
normalized area under a labels-vs-score learning curve."""

from __future__ import annotations

import math

import numpy as np

from ._util import rankdata


def cohen_kappa(y_true, y_pred) -> float:
    """Chance-corrected agreement between two label sequences.

    Uses integer marginal counts so the degenerate case is exact: when the
    expected agreement is 1 (both sequences constant on the same class) the
    result is 1 for perfect agreement and 0 otherwise.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise ValueError("need two equal-length non-empty label sequences")
    n = y_true.size
    classes = np.union1d(y_true, y_pred)
    agree = int(np.sum(y_true == y_pred))
    chance = sum(
        int(np.sum(y_true == c)) * int(np.sum(y_pred == c)) for c in classes
    )
    if chance == n * n:  # p_e == 1 exactly
        return 1.0 if agree == n else 0.0
    p_o = agree / n
    p_e = chance / (n * n)
    return (p_o - p_e) / (1.0 - p_e)


def roc_auc_ovr_macro(y_true, proba) -> float:
    """One-vs-rest ROC AUC, macro-averaged over the classes present in
    ``y_true``; ties get credit 0.5 via the rank (Mann-Whitney) formulation.

    Returns NaN when fewer than two classes are present, in which case no
    pairwise ranking is defined.
    """
    y_true = np.asarray(y_true)
    proba = np.asarray(proba, dtype=float)
    if proba.ndim != 2 or proba.shape[0] != y_true.size:
        raise ValueError("probability matrix must be (n_rows, n_classes)")
    present = np.unique(y_true)
    if present.size < 2:
        return math.nan
    per_class = []
    for c in present:
        positive = y_true == c
        n_pos = int(positive.sum())
        n_neg = y_true.size - n_pos
        ranks = rankdata(proba[:, int(c)])
        auc = (ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        per_class.append(auc)
    return float(np.mean(per_class))


def aulc_norm(curve, n_max: int) -> float:
    """Trapezoidal area of a (labels, score) curve divided by the label span.

    ``curve`` is a sequence of (n_t, y_t) pairs with strictly increasing n_t.
    The denominator is always ``n_max - n_0`` even when the curve stops early,
    which conservatively penalizes truncated runs.
    """
    points = [(int(n), float(y)) for n, y in curve]
    if len(points) < 2:
        raise ValueError("curve needs at least two points")
    ns = [n for n, _ in points]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("curve label counts must be strictly increasing")
    if ns[0] >= n_max:
        raise ValueError(f"curve starts at {ns[0]}, at or past the budget {n_max}")
    area = 0.0
    for (n_prev, y_prev), (n_cur, y_cur) in zip(points, points[1:]):
        area += 0.5 * (y_cur + y_prev) * (n_cur - n_prev)
    return area / (n_max - ns[0])
