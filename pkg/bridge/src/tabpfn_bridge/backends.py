"""Prediction backends: the real TabPFN wrapper and a deterministic stub.

A backend maps (context features, context labels, query features, class
count) to a list of probability rows in the request's class order. Classes
absent from the context get probability zero; the remaining columns already
sum to one, so no renormalization is applied.
"""

from __future__ import annotations

import math

import numpy as np


class BackendError(RuntimeError):
    """The backend could not score the request."""


class TabPFNBackend:
    """Conditions a TabPFN classifier on the request context each call.

    The engine sends integer labels already in canonical order; mapping the
    model's class order back onto the request's 0..K-1 columns happens here.
    """

    name = "tabpfn"

    def __init__(self, n_estimators: int = 32, device: str = "cpu"):
        if n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        try:
            from tabpfn import TabPFNClassifier
        except ImportError as exc:
            raise BackendError(
                "the 'tabpfn' package is not installed; install tabpfn-bridge[tabpfn]"
            ) from exc
        self._classifier_cls = TabPFNClassifier
        self.n_estimators = n_estimators
        self.device = device

    def _make_classifier(self):
        try:
            return self._classifier_cls(n_estimators=self.n_estimators, device=self.device)
        except TypeError:
            # older releases call the ensemble knob N_ensemble_configurations
            return self._classifier_cls(
                N_ensemble_configurations=self.n_estimators, device=self.device
            )

    def metadata(self) -> dict:
        try:
            import tabpfn

            version = getattr(tabpfn, "__version__", None)
        except ImportError:
            version = None
        return {
            "backend": self.name,
            "package_version": version,
            "n_estimators": self.n_estimators,
            "device": self.device,
        }

    def predict(self, context_x, context_y, query_x, n_classes: int):
        x = np.asarray(context_x, dtype=float)
        y = np.asarray(context_y, dtype=np.int64)
        q = np.asarray(query_x, dtype=float)
        model = self._make_classifier()
        model.fit(x, y)
        proba = np.asarray(model.predict_proba(q), dtype=float)
        classes = [int(c) for c in model.classes_]
        if any(c < 0 or c >= n_classes for c in classes):
            raise BackendError(f"context labels {classes} exceed the declared class count {n_classes}")
        out = np.zeros((q.shape[0], n_classes))
        for column, c in enumerate(classes):
            out[:, c] = proba[:, column]
        return out.tolist()


class StubBackend:
    """Deterministic softmax over signed query features; used to exercise the
    protocol without the model dependency."""

    name = "stub"

    def metadata(self) -> dict:
        return {"backend": self.name}

    def predict(self, context_x, context_y, query_x, n_classes: int):
        rows = []
        for row in query_x:
            logits = []
            for c in range(n_classes):
                value = float(row[c % len(row)])
                logits.append(value if c % 2 == 0 else -value)
            peak = max(logits)
            weights = [math.exp(z - peak) for z in logits]
            total = sum(weights)
            rows.append([w / total for w in weights])
        return rows


def make_backend(name: str, n_estimators: int = 32, device: str = "cpu"):
    if name == "tabpfn":
        return TabPFNBackend(n_estimators=n_estimators, device=device)
    if name == "stub":
        return StubBackend()
    raise ValueError(f"unknown backend {name!r}")
