"""The prediction contract and its strict validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Maximum tolerated deviation of a probability row sum from 1.
PROBABILITY_ATOL = 1e-6


class PredictorError(RuntimeError):
    """A predictor could not produce a usable probability matrix."""


def validate_probability_matrix(proba, n_rows: int, n_classes: int) -> np.ndarray:
    """Check shape, finiteness, entry range, and row sums; never repair.

    Invalid matrices raise :class:`PredictorError` so a bad predictor aborts
    the run instead of being silently renormalized.
    """
    p = np.asarray(proba, dtype=float)
    if p.shape != (n_rows, n_classes):
        raise PredictorError(f"probability matrix has shape {p.shape}, expected {(n_rows, n_classes)}")
    if not np.isfinite(p).all():
        raise PredictorError("probability matrix contains non-finite entries")
    if (p < 0).any() or (p > 1).any():
        raise PredictorError("probability entries must lie in [0, 1]")
    sums = p.sum(axis=1)
    worst = float(np.abs(sums - 1.0).max())
    if worst > PROBABILITY_ATOL:
        raise PredictorError(f"probability rows must sum to 1 within {PROBABILITY_ATOL}; worst deviation {worst:g}")
    return p


@dataclass(frozen=True)
class PredictorHandle:
    """Declarative predictor selection: a kind plus kind-specific parameters."""

    kind: str  # "builtin_neighbor" | "builtin_linear" | "external"
    params: dict = field(default_factory=dict)


def make_predictor(handle: PredictorHandle):
    """Instantiate the predictor object a handle describes."""
    from .external import ExternalPredictor
    from .linear import LinearPredictor
    from .neighbor import NeighborPredictor

    if handle.kind == "builtin_neighbor":
        return NeighborPredictor(**handle.params)
    if handle.kind == "builtin_linear":
        return LinearPredictor(**handle.params)
    if handle.kind == "external":
        return ExternalPredictor(**handle.params)
    raise ValueError(f"unknown predictor kind {handle.kind!r}")


def predict_proba(predictor, context_x, context_y, query_x, n_classes: int) -> np.ndarray:
    """Score queries against a labeled context and validate the result.

    ``predictor`` is either a :class:`PredictorHandle` or any object exposing
    ``predict_proba(context_x, context_y, query_x, n_classes)``.
    """
    if isinstance(predictor, PredictorHandle):
        predictor = make_predictor(predictor)
    context_x = np.asarray(context_x, dtype=float)
    context_y = np.asarray(context_y)
    query_x = np.asarray(query_x, dtype=float)
    if context_x.shape[0] == 0:
        raise ValueError("context must be non-empty")
    if query_x.shape[0] == 0:
        raise ValueError("queries must be non-empty")
    if context_y.min() < 0 or context_y.max() >= n_classes:
        raise ValueError("context labels outside [0, n_classes)")
    p = predictor.predict_proba(context_x, context_y, query_x, n_classes)
    return validate_probability_matrix(p, query_x.shape[0], n_classes)
