"""Impute/standardize/encode pipeline shared by every strategy.

All statistics are fitted on training-pool rows only and frozen; the same
fitted model transforms pool, context, and test rows, so no information can
leak from held-out data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import MISSING_CATEGORY, ColumnMeta, Dataset, canonical_token

#: Standard deviations below this are treated as zero and clamped to 1.
STD_CLAMP = 1e-12


@dataclass(frozen=True)
class NumericColumnStats:
    mean: float
    std: float  # population std, clamped to 1 when degenerate


@dataclass(frozen=True)
class CategoricalColumnStats:
    mode: str
    codes: dict  # token -> dense ordinal code 0..C-1


ColumnStats = Union[NumericColumnStats, CategoricalColumnStats]


@dataclass(frozen=True)
class PreprocessorModel:
    """Frozen per-column statistics defining the output feature space."""

    columns: tuple[ColumnMeta, ...]
    stats: tuple[ColumnStats, ...]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def to_json(self) -> str:
        payload = {"columns": [], "stats": []}
        for col, st in zip(self.columns, self.stats):
            payload["columns"].append({"name": col.name, "kind": col.kind, "source": col.source})
            if isinstance(st, NumericColumnStats):
                payload["stats"].append({"type": "numerical", "mean": st.mean, "std": st.std})
            else:
                payload["stats"].append({"type": "categorical", "mode": st.mode, "codes": st.codes})
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PreprocessorModel":
        payload = json.loads(text)
        columns = tuple(ColumnMeta(**c) for c in payload["columns"])
        stats = []
        for st in payload["stats"]:
            if st["type"] == "numerical":
                stats.append(NumericColumnStats(mean=st["mean"], std=st["std"]))
            else:
                stats.append(CategoricalColumnStats(mode=st["mode"], codes=dict(st["codes"])))
        return cls(columns=columns, stats=tuple(stats))


def fit_preprocessor(ds: Dataset, pool_indices) -> PreprocessorModel:
    """Fit imputation/scaling/encoding statistics from pool rows only."""
    pool_indices = np.asarray(pool_indices, dtype=np.int64)
    if pool_indices.size == 0:
        raise ValueError("cannot fit preprocessor on an empty pool")
    stats: list[ColumnStats] = []
    for j, col in enumerate(ds.columns):
        if col.kind is None:
            raise ValueError(f"column {col.name!r} has unresolved kind; run infer_column_kinds first")
        cells = ds.rows[pool_indices, j]
        if col.kind == "numerical":
            values = np.array([v for v in cells if isinstance(v, float)], dtype=float)
            if values.size == 0:
                stats.append(NumericColumnStats(mean=0.0, std=1.0))
                continue
            mean = float(values.mean())
            std = float(values.std())  # population, ddof=0
            if std < STD_CLAMP:
                std = 1.0
            stats.append(NumericColumnStats(mean=mean, std=std))
        else:
            tokens = [canonical_token(v) for v in cells if v is not None]
            if not tokens:
                stats.append(CategoricalColumnStats(mode=MISSING_CATEGORY, codes={MISSING_CATEGORY: 0}))
                continue
            counts: dict[str, int] = {}
            for t in tokens:
                counts[t] = counts.get(t, 0) + 1
            top = max(counts.values())
            mode = min(t for t, c in counts.items() if c == top)
            codes = {t: i for i, t in enumerate(sorted(counts))}
            stats.append(CategoricalColumnStats(mode=mode, codes=codes))
    return PreprocessorModel(columns=ds.columns, stats=tuple(stats))


def transform(model: PreprocessorModel, rows: np.ndarray) -> np.ndarray:
    """Map raw rows into the fitted feature space.

    Numerical cells are z-scored with missing values imputed at the pool mean
    (hence 0 after scaling); categorical cells become ordinal codes, with
    missing and unseen tokens falling back to the pool mode's code.
    """
    rows = np.asarray(rows, dtype=object)
    if rows.ndim != 2 or rows.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got {rows.shape}")
    out = np.empty(rows.shape, dtype=float)
    for j, st in enumerate(model.stats):
        cells = rows[:, j]
        if isinstance(st, NumericColumnStats):
            values = np.array([v if isinstance(v, float) else st.mean for v in cells], dtype=float)
            out[:, j] = (values - st.mean) / st.std
        else:
            fallback = st.codes[st.mode]
            out[:, j] = [
                st.codes.get(canonical_token(v), fallback) if v is not None else fallback
                for v in cells
            ]
    return out
