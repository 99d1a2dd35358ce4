"""Multinomial logistic regression with balanced class weights.

This doubles as the cheap screening proxy for two-stage acquisition and as a
built-in main predictor. Training is deterministic: zero initialization and
full-batch gradient descent with backtracking line search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class LinearModel:
    """Fitted weights, bias in the last column.

    ``constant_class`` marks the degenerate single-class fallback, which
    predicts that class with probability one.
    """

    weights: np.ndarray  # (n_classes, n_features + 1)
    class_weights: np.ndarray  # (n_classes,), n/(K*n_c) for present classes
    reg: float
    constant_class: Optional[int] = None


def class_balance_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-class multipliers n/(K*n_c); absent classes get 0."""
    counts = np.bincount(y, minlength=n_classes).astype(float)
    out = np.zeros(n_classes)
    present = counts > 0
    out[present] = y.size / (n_classes * counts[present])
    return out


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(weights, x, y, n_classes, reg, class_weights):
    """Mean class-weighted cross-entropy plus an L2 penalty on non-bias weights.

    Returns (loss, gradient) with the gradient shaped like ``weights``; kept
    analytic so it can be checked against finite differences.
    """
    weights = np.asarray(weights, dtype=float)
    xb = _with_bias(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    n = y.size
    sample_w = class_weights[y]
    logits = xb @ weights.T
    log_p = _log_softmax(logits)
    loss = float(-(sample_w * log_p[np.arange(n), y]).sum() / n)
    loss += 0.5 * reg * float((weights[:, :-1] ** 2).sum())
    p = np.exp(log_p)
    residual = p.copy()
    residual[np.arange(n), y] -= 1.0
    grad = (residual * sample_w[:, None]).T @ xb / n
    grad[:, :-1] += reg * weights[:, :-1]
    return loss, grad


def fit_linear(
    context_x,
    context_y,
    n_classes: int,
    reg: float = 1.0,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> LinearModel:
    """Deterministic full-batch descent; stops when the gradient max-norm
    drops below ``tol``.

    A single-class context cannot support a multinomial fit; the returned
    model then outputs the one-hot of that class.
    """
    x = np.asarray(context_x, dtype=float)
    y = np.asarray(context_y, dtype=np.int64)
    present = np.unique(y)
    cw = class_balance_weights(y, n_classes)
    if present.size < 2:
        return LinearModel(
            weights=np.zeros((n_classes, x.shape[1] + 1)),
            class_weights=cw,
            reg=reg,
            constant_class=int(present[0]),
        )
    weights = np.zeros((n_classes, x.shape[1] + 1))
    loss, grad = loss_and_grad(weights, x, y, n_classes, reg, cw)
    for _ in range(max_iter):
        gnorm2 = float((grad * grad).sum())
        if np.abs(grad).max() < tol:
            break
        step = 1.0
        for _ in range(60):  # Armijo backtracking
            candidate = weights - step * grad
            new_loss, new_grad = loss_and_grad(candidate, x, y, n_classes, reg, cw)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            break  # no usable step left; gradient is numerically flat
        weights, loss, grad = candidate, new_loss, new_grad
    return LinearModel(weights=weights, class_weights=cw, reg=reg)


def linear_predict_proba(model: LinearModel, query_x) -> np.ndarray:
    x = np.asarray(query_x, dtype=float)
    n_classes = model.weights.shape[0]
    if model.constant_class is not None:
        p = np.zeros((x.shape[0], n_classes))
        p[:, model.constant_class] = 1.0
        return p
    logits = _with_bias(x) @ model.weights.T
    return np.exp(_log_softmax(logits))


@dataclass(frozen=True)
class LinearPredictor:
    reg: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6

    def predict_proba(self, context_x, context_y, query_x, n_classes: int) -> np.ndarray:
        model = fit_linear(
            context_x, context_y, n_classes,
            reg=self.reg, max_iter=self.max_iter, tol=self.tol,
        )
        return linear_predict_proba(model, query_x)
