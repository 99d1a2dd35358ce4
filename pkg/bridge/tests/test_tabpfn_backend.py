"""Tests requiring the real TabPFN package; they skip when it is missing.

The benchmark anchor is best-effort by design: a miss prints a warning
instead of failing, since absolute scores move with package versions and
seed derivations.
"""

import json
import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

tabpfn = pytest.importorskip("tabpfn")

from tabpfn_bridge.backends import TabPFNBackend  # noqa: E402


class TestBackendSmoke:
    def test_simplex_rows(self):
        rng = np.random.default_rng(0)
        backend = TabPFNBackend(n_estimators=32, device="cpu")
        p = np.asarray(backend.predict(
            rng.normal(size=(50, 4)).tolist(),
            rng.integers(0, 3, size=50).tolist(),
            rng.normal(size=(10, 4)).tolist(),
            3,
        ))
        assert p.shape == (10, 3)
        assert np.abs(p.sum(axis=1) - 1).max() < 1e-6

    def test_absent_class_column_is_zero(self):
        rng = np.random.default_rng(1)
        backend = TabPFNBackend(n_estimators=8, device="cpu")
        p = np.asarray(backend.predict(
            rng.normal(size=(20, 3)).tolist(),
            (rng.integers(0, 2, size=20)).tolist(),  # classes 0/1 of a 4-class task
            rng.normal(size=(5, 3)).tolist(),
            4,
        ))
        assert np.abs(p[:, 2:]).max() == 0.0
        assert np.abs(p.sum(axis=1) - 1).max() < 1e-6


@pytest.mark.slow
def test_iris_margin_anchor(tmp_path):
    """Margin acquisition on Iris through the bridge should land near the
    published mean AULC; deviations warn rather than fail."""
    tabal = pytest.importorskip("tabal")
    datasets = pytest.importorskip("sklearn.datasets")

    iris = datasets.load_iris()
    csv_path = tmp_path / "iris.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("a,b,c,d,label\n")
        for row, target in zip(iris.data, iris.target):
            fh.write(",".join(repr(float(v)) for v in row) + f",{iris.target_names[target]}\n")

    from tabal.acquisition import AcquisitionConfig
    from tabal.harness import DatasetSpec, ExperimentConfig, run_experiment, summarize
    from tabal.predictors import PredictorHandle

    cfg = ExperimentConfig(
        datasets=[DatasetSpec(name="iris", path=str(csv_path))],
        strategies=[AcquisitionConfig(strategy="margin")],
        predictor=PredictorHandle("external", {
            "command": [sys.executable, "-m", "tabpfn_bridge", "--stdio", "--n-estimators", "32"],
        }),
        seeds=list(range(10)),
        batch_sizes=[10],
        budget=100,
        output_dir=str(tmp_path / "store"),
        jobs=1,
    )
    store = run_experiment(cfg)
    assert not store.failures, store.failures
    row = summarize(store, metric="aulc")[0]
    if abs(row["mean"] - 0.917) > 0.06:
        warnings.warn(
            f"Iris margin AULC {row['mean']:.3f} outside 0.917 +/- 0.06; "
            "treating as informational (package-version variance)"
        )
