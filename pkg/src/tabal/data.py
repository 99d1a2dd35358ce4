"""Dataset ingestion, size capping, and stratified pool/test splitting.

Raw cells are kept as parsed floats or category tokens (``None`` marks a
missing value); all numeric encoding happens later in the preprocessing
pipeline so that its statistics can be fitted on the training pool only.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

#: Cell spellings treated as missing values in input CSVs.
MISSING_TOKENS = frozenset({"", "NA", "?"})

#: Synthetic category used when a categorical column has no observed values.
MISSING_CATEGORY = "⟨missing⟩"

#: Integer-valued columns with fewer unique values than this are categorical.
CATEGORICAL_UNIQUE_LIMIT = 20

CellValue = Union[float, str, None]


class DatasetError(ValueError):
    """Unusable input: malformed file, degenerate labels, or bad arguments."""


@dataclass(frozen=True)
class ColumnMeta:
    """Typing info for one feature column.

    ``kind`` is ``None`` while a metadata-less column is awaiting inference;
    it is fixed once :func:`infer_column_kinds` has run.
    """

    name: str
    kind: Optional[str]  # "categorical" | "numerical" | None (pending)
    source: str  # "metadata" | "inferred"


@dataclass(frozen=True)
class Dataset:
    """An in-memory classification table with a canonical class order.

    ``class_names`` is sorted lexicographically at load time and defines the
    column order of every probability matrix produced downstream.
    """

    name: str
    rows: np.ndarray  # object array (n_rows, n_features)
    labels: np.ndarray  # int array (n_rows,), indices into class_names
    class_names: tuple[str, ...]
    columns: tuple[ColumnMeta, ...]

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.rows.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class SplitResult:
    """Disjoint pool/test row indices covering the whole dataset."""

    pool_indices: np.ndarray
    test_indices: np.ndarray
    seed: int


def _parse_cell(token: str) -> CellValue:
    token = token.strip()
    if token in MISSING_TOKENS:
        return None
    try:
        value = float(token)
    except ValueError:
        return token
    # "nan"/"inf" spellings parse as floats but carry no usable value
    if not math.isfinite(value):
        return None
    return value


def canonical_token(value) -> str:
    """Category identity of a cell: integers lose their trailing ``.0``."""
    if isinstance(value, str):
        return value
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def load_dataset(path, meta_path=None, name: Optional[str] = None) -> Dataset:
    """Read a headered CSV (labels in the last column unless the metadata
    sidecar names another) into a :class:`Dataset`.

    The sidecar, when given, is a JSON object mapping column names to
    ``{"kind": "categorical"|"numerical"}`` entries, plus an optional
    ``"label_column"`` key. Columns without metadata are left for
    :func:`infer_column_kinds`.
    """
    path = Path(path)
    sidecar: dict = {}
    if meta_path is not None:
        with open(meta_path, encoding="utf-8") as fh:
            sidecar = json.load(fh)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        table = list(reader)
    if not table or len(table[0]) < 2:
        raise DatasetError(f"{path}: need a header row and at least two columns")
    header = [h.strip() for h in table[0]]

    label_column = sidecar.get("label_column")
    if label_column is None:
        label_idx = len(header) - 1
    else:
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)

    feature_idx = [j for j in range(len(header)) if j != label_idx]
    rows: list[list[CellValue]] = []
    label_tokens: list[str] = []
    for i, record in enumerate(table[1:], start=2):
        if len(record) != len(header):
            raise DatasetError(f"{path}:{i}: expected {len(header)} fields, got {len(record)}")
        raw_label = record[label_idx].strip()
        if raw_label in MISSING_TOKENS:
            raise DatasetError(f"{path}:{i}: empty label cell")
        label_tokens.append(raw_label)
        rows.append([_parse_cell(record[j]) for j in feature_idx])

    class_names = tuple(sorted(set(label_tokens)))
    if len(class_names) < 2:
        raise DatasetError(f"{path}: need at least 2 classes, found {len(class_names)}")
    class_index = {c: k for k, c in enumerate(class_names)}
    labels = np.array([class_index[t] for t in label_tokens], dtype=np.int64)

    columns = []
    for j in feature_idx:
        col_name = header[j]
        meta = sidecar.get(col_name)
        if isinstance(meta, dict) and "kind" in meta:
            kind = meta["kind"]
            if kind not in ("categorical", "numerical"):
                raise DatasetError(f"{path}: bad kind {kind!r} for column {col_name!r}")
            columns.append(ColumnMeta(name=col_name, kind=kind, source="metadata"))
        else:
            columns.append(ColumnMeta(name=col_name, kind=None, source="inferred"))

    data = np.empty((len(rows), len(feature_idx)), dtype=object)
    for i, row in enumerate(rows):
        data[i, :] = row

    return Dataset(
        name=name if name is not None else path.stem,
        rows=data,
        labels=labels,
        class_names=class_names,
        columns=tuple(columns),
    )


def infer_column_kinds(ds: Dataset) -> Dataset:
    """Resolve pending column kinds.

    A column is categorical iff all its non-missing values are integer-valued
    and it has fewer than :data:`CATEGORICAL_UNIQUE_LIMIT` unique non-missing
    values; any non-numeric token makes it categorical outright. Columns with
    no observed values default to categorical. Idempotent.
    """
    resolved = []
    changed = False
    for j, col in enumerate(ds.columns):
        if col.kind is not None:
            resolved.append(col)
            continue
        changed = True
        values = [v for v in ds.rows[:, j] if v is not None]
        if not values:
            kind = "categorical"
        elif any(isinstance(v, str) for v in values):
            kind = "categorical"
        else:
            integral = all(float(v).is_integer() for v in values)
            n_unique = len({float(v) for v in values})
            kind = "categorical" if integral and n_unique < CATEGORICAL_UNIQUE_LIMIT else "numerical"
        resolved.append(replace(col, kind=kind))
    if not changed:
        return ds
    return replace(ds, columns=tuple(resolved))


def subsample(ds: Dataset, cap: int = 10000, seed: int = 0) -> Dataset:
    """Uniform without-replacement cap on the row count, order-preserving."""
    if cap < ds.n_classes:
        raise DatasetError(f"cap {cap} smaller than class count {ds.n_classes}")
    if ds.n_rows <= cap:
        return ds
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(ds.n_rows, size=cap, replace=False))
    return replace(ds, rows=ds.rows[keep], labels=ds.labels[keep])


def stratified_split(ds: Dataset, test_fraction: float = 0.3, seed: int = 0) -> SplitResult:
    """Per-class split into an unlabeled pool and a held-out test set.

    Each class contributes round-half-up(test_fraction * n_c) test rows,
    clamped to [1, n_c - 1] so both sides see every class.
    """
    counts = np.bincount(ds.labels, minlength=ds.n_classes)
    if (counts < 2).any():
        bad = ds.class_names[int(np.argmin(counts))]
        raise DatasetError(f"class {bad!r} has fewer than 2 rows; cannot split")
    rng = np.random.default_rng(seed)
    test_parts = []
    for c in range(ds.n_classes):
        rows_c = np.flatnonzero(ds.labels == c)
        n_test = int(math.floor(test_fraction * rows_c.size + 0.5))
        n_test = min(max(n_test, 1), rows_c.size - 1)
        test_parts.append(rng.choice(rows_c, size=n_test, replace=False))
    test = np.sort(np.concatenate(test_parts))
    mask = np.ones(ds.n_rows, dtype=bool)
    mask[test] = False
    pool = np.flatnonzero(mask)
    return SplitResult(pool_indices=pool, test_indices=test, seed=seed)
