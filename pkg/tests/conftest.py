"""Shared builders for synthetic datasets and CSV files."""

import csv

import numpy as np
import pytest

from tabal.data import ColumnMeta, Dataset


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def make_dataset(features: np.ndarray, labels: np.ndarray, name: str = "synthetic") -> Dataset:
    """Wrap numeric feature/label arrays as a ready-to-use Dataset."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.empty(features.shape, dtype=object)
    for i in range(features.shape[0]):
        for j in range(features.shape[1]):
            rows[i, j] = float(features[i, j])
    n_classes = int(labels.max()) + 1
    columns = tuple(
        ColumnMeta(name=f"f{j}", kind="numerical", source="metadata")
        for j in range(features.shape[1])
    )
    return Dataset(
        name=name,
        rows=rows,
        labels=labels,
        class_names=tuple(f"c{k}" for k in range(n_classes)),
        columns=columns,
    )


def two_gaussians(n_rows: int = 500, separation: float = 8.0, seed: int = 0, name: str = "gauss2") -> Dataset:
    """Balanced two-class blobs with unit variance and the given mean gap."""
    rng = np.random.default_rng(seed)
    half = n_rows // 2
    x0 = rng.normal(loc=(0.0, 0.0), scale=1.0, size=(half, 2))
    x1 = rng.normal(loc=(separation, 0.0), scale=1.0, size=(n_rows - half, 2))
    features = np.vstack([x0, x1])
    labels = np.array([0] * half + [1] * (n_rows - half))
    order = rng.permutation(n_rows)
    return make_dataset(features[order], labels[order], name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
