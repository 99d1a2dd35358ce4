"""Experiment orchestration: run grids of (dataset, strategy, batch size,
seed), persist one JSON record per run, and derive summary tables,
significance reports, and learning-curve files from the stored records.

Every run's randomness is derived from its key, so records are identical
whatever the worker count or completion order, and interrupted experiments
resume by skipping keys that already have a record on disk.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__ as ENGINE_VERSION
from ._util import derive_seed, fmt6
from .acquisition import AcquisitionConfig
from .data import Dataset, infer_column_kinds, load_dataset, stratified_split, subsample
from .loop import LoopConfig, RunRecord, run_active_loop
from .metrics import aulc_norm
from .predictors import PredictorHandle, make_predictor
from .stats import bh_adjust, wilcoxon_signed_rank

log = logging.getLogger("tabal")

SUMMARY_METRICS = ("aulc", "final_kappa", "final_auc")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    meta_path: Optional[str] = None


@dataclass
class ExperimentConfig:
    datasets: list  # DatasetSpec
    strategies: list  # AcquisitionConfig
    predictor: PredictorHandle
    seeds: list = field(default_factory=lambda: list(range(10)))
    batch_sizes: list = field(default_factory=lambda: [10])
    budget: int = 100
    stop_pool_fraction: float = 0.5
    test_fraction: float = 0.3
    subsample_cap: int = 10000
    output_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if not self.datasets or not self.strategies or not self.seeds:
            raise ValueError("datasets, strategies, and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")

    def canonical_dict(self) -> dict:
        return {
            "datasets": [
                {"name": d.name, "path": str(d.path), "meta_path": d.meta_path and str(d.meta_path)}
                for d in self.datasets
            ],
            "strategies": [vars(s).copy() for s in self.strategies],
            "predictor": {"kind": self.predictor.kind, "params": dict(self.predictor.params)},
            "seeds": list(self.seeds),
            "batch_sizes": list(self.batch_sizes),
            "budget": self.budget,
            "stop_pool_fraction": self.stop_pool_fraction,
            "test_fraction": self.test_fraction,
            "subsample_cap": self.subsample_cap,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.canonical_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path) -> ExperimentConfig:
    """Parse the JSON experiment configuration file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    datasets = [
        DatasetSpec(name=d["name"], path=d["path"], meta_path=d.get("meta_path"))
        for d in raw["datasets"]
    ]
    strategies = []
    for s in raw["strategies"]:
        if isinstance(s, str):
            strategies.append(AcquisitionConfig(strategy=s))
        else:
            strategies.append(AcquisitionConfig(**s))
    pred = dict(raw["predictor"])
    kind = pred.pop("kind")
    predictor = PredictorHandle(kind=kind, params=pred)
    kwargs = {}
    for key in (
        "seeds", "batch_sizes", "budget", "stop_pool_fraction",
        "test_fraction", "subsample_cap", "output_dir", "jobs",
    ):
        if key in raw:
            kwargs[key] = raw[key]
    return ExperimentConfig(datasets=datasets, strategies=strategies, predictor=predictor, **kwargs)


def _run_filename(dataset: str, strategy: str, batch_size: int, seed: int) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in dataset)
    return f"{safe}__{strategy}__b{batch_size}__s{seed}.json"


class ResultStore:
    """A directory of one-JSON-file-per-run records plus a manifest."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.failures: list = []
        self._lock = threading.Lock()

    @property
    def manifest_path(self) -> Path:
        return self.directory / "manifest.json"

    def init_manifest(self, cfg: ExperimentConfig) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "config_hash": cfg.config_hash(),
            "engine_version": ENGINE_VERSION,
            "config": cfg.canonical_dict(),
        }
        if self.manifest_path.exists():
            existing = json.loads(self.manifest_path.read_text(encoding="utf-8"))
            if existing.get("config_hash") != manifest["config_hash"]:
                raise ValueError(
                    f"store {self.directory} was produced by a different config; "
                    "refusing to mix records"
                )
            return
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")

    def manifest(self) -> dict:
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def record_path(self, dataset: str, strategy: str, batch_size: int, seed: int) -> Path:
        return self.directory / _run_filename(dataset, strategy, batch_size, seed)

    def has(self, dataset: str, strategy: str, batch_size: int, seed: int) -> bool:
        return self.record_path(dataset, strategy, batch_size, seed).exists()

    def put(self, record: RunRecord) -> None:
        path = self.record_path(record.dataset, record.strategy, record.batch_size, record.seed)
        text = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(text, encoding="utf-8")
            tmp.replace(path)

    def records(self) -> list:
        """All records, sorted by key for deterministic downstream output."""
        out = []
        for path in sorted(self.directory.glob("*.json")):
            if path.name == "manifest.json" or path.name == "failures.json":
                continue
            out.append(RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        out.sort(key=lambda r: r.key)
        return out


def _run_one(cfg: ExperimentConfig, dataset: Dataset, strategy: AcquisitionConfig,
             batch_size: int, seed: int, predictor) -> RunRecord:
    run_seed = derive_seed("run", dataset.name, strategy.strategy, batch_size, seed)
    capped = subsample(dataset, cap=cfg.subsample_cap, seed=derive_seed(run_seed, "subsample"))
    split = stratified_split(capped, test_fraction=cfg.test_fraction, seed=derive_seed(run_seed, "split"))
    loop_cfg = LoopConfig(
        budget=cfg.budget,
        batch_size=batch_size,
        stop_pool_fraction=cfg.stop_pool_fraction,
    )
    record = run_active_loop(capped, split, predictor, loop_cfg, strategy, derive_seed(run_seed, "loop"))
    record.seed = seed  # store keys use the experiment-level seed, not the derived stream
    return record


def run_experiment(cfg: ExperimentConfig) -> ResultStore:
    """Execute the full grid, skipping keys that already have records.

    Workers each own a predictor instance (external endpoints get one
    connection per worker). Per-run failures are collected, written to
    failures.json, and do not stop the rest of the grid.
    """
    store = ResultStore(cfg.output_dir)
    store.init_manifest(cfg)

    datasets = {}
    for spec in cfg.datasets:
        ds = infer_column_kinds(load_dataset(spec.path, spec.meta_path, name=spec.name))
        datasets[spec.name] = ds

    tasks = [
        (spec.name, strategy, batch_size, seed)
        for spec in cfg.datasets
        for strategy in cfg.strategies
        for batch_size in cfg.batch_sizes
        for seed in cfg.seeds
    ]
    pending = [t for t in tasks if not store.has(t[0], t[1].strategy, t[2], t[3])]
    log.info("%d runs total, %d already stored, %d to go", len(tasks), len(tasks) - len(pending), len(pending))

    local = threading.local()

    def worker(task):
        name, strategy, batch_size, seed = task
        if not hasattr(local, "predictor"):
            local.predictor = make_predictor(cfg.predictor)
        record = _run_one(cfg, datasets[name], strategy, batch_size, seed, local.predictor)
        store.put(record)
        log.info("done %s/%s b=%d seed=%d%s", name, strategy.strategy, batch_size, seed,
                 " (incomplete)" if record.incomplete else "")
        if record.incomplete:  # partial record persisted, but the run still failed
            store.failures.append((name, strategy.strategy, batch_size, seed, record.note))

    if cfg.jobs <= 1:
        for task in pending:
            try:
                worker(task)
            except Exception as exc:  # noqa: BLE001 - per-run isolation
                store.failures.append((task[0], task[1].strategy, task[2], task[3], str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {pool.submit(worker, task): task for task in pending}
            for future, task in futures.items():
                try:
                    future.result()
                except Exception as exc:  # noqa: BLE001
                    store.failures.append((task[0], task[1].strategy, task[2], task[3], str(exc)))

    if store.failures:
        payload = [
            {"dataset": d, "strategy": s, "batch_size": b, "seed": sd, "error": e}
            for d, s, b, sd, e in sorted(store.failures)
        ]
        (store.directory / "failures.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
        log.warning("%d runs failed; see failures.json", len(store.failures))
    return store


def _metric_value(record: RunRecord, metric: str) -> float:
    if metric == "aulc":
        return aulc_norm(record.kappa_curve(), record.budget)
    if metric == "final_kappa":
        return record.curve[-1][1]
    if metric == "final_auc":
        return record.curve[-1][2]
    raise ValueError(f"unknown metric {metric!r}; expected one of {SUMMARY_METRICS}")


def _std(values: np.ndarray) -> float:
    # sample std; one observation carries no spread information
    if values.size <= 1:
        return 0.0
    return float(values.std(ddof=1))


def summarize(store: ResultStore, metric: str = "aulc") -> list:
    """Per (dataset, strategy, batch size): mean and std across seeds.

    Incomplete records are excluded (their cells go absent rather than being
    computed from a truncated curve), and groups the manifest expects but the
    store lacks appear with empty values instead of zeros. The best mean per
    (dataset, batch size) is flagged.
    """
    records = [r for r in store.records() if not r.incomplete]
    groups: dict = {}
    for record in records:
        groups.setdefault((record.dataset, record.strategy, record.batch_size), []).append(record)
    if store.manifest_path.exists():
        cfg = store.manifest()["config"]
        for d in cfg["datasets"]:
            for s in cfg["strategies"]:
                for b in cfg["batch_sizes"]:
                    groups.setdefault((d["name"], s["strategy"], b), [])

    rows = []
    for (dataset, strategy, batch_size) in sorted(groups):
        group = sorted(groups[(dataset, strategy, batch_size)], key=lambda r: r.seed)
        values = np.array([_metric_value(r, metric) for r in group], dtype=float)
        rows.append({
            "dataset": dataset,
            "strategy": strategy,
            "batch_size": batch_size,
            "mean": float(values.mean()) if values.size else None,
            "std": _std(values) if values.size else None,
            "n_seeds": int(values.size),
            "best": False,
        })
    best_by_dataset: dict = {}
    for row in rows:
        if row["mean"] is None:
            continue
        slot = (row["dataset"], row["batch_size"])
        current = best_by_dataset.get(slot)
        if current is None or row["mean"] > current["mean"]:
            best_by_dataset[slot] = row
    for row in best_by_dataset.values():
        row["best"] = True
    return rows


def write_summary_csv(rows: list, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "strategy", "batch_size", "mean", "std", "n_seeds", "best"])
        for row in rows:
            writer.writerow([
                row["dataset"], row["strategy"], row["batch_size"],
                fmt6(row["mean"]), fmt6(row["std"]),
                row["n_seeds"], "1" if row["best"] else "0",
            ])
    return path


@dataclass(frozen=True)
class SignificanceRow:
    dataset: str
    delta_aulc: float  # mean per-seed difference, method_a minus method_b
    p_raw: float
    p_adj: float
    verdict: str  # "higher" | "lower" | "none"


def significance_report(store: ResultStore, method_a: str, method_b: str,
                        alpha_level: float = 0.05) -> list:
    """Paired per-seed AULC comparison of two strategies across datasets.

    Wilcoxon signed-rank per dataset, Benjamini-Hochberg adjustment across
    datasets, verdicts at ``alpha_level`` on the adjusted values.
    """
    records = [r for r in store.records() if not r.incomplete]
    per_method: dict = {}
    for record in records:
        if record.strategy in (method_a, method_b):
            per_method.setdefault((record.dataset, record.strategy), {})[
                (record.batch_size, record.seed)
            ] = aulc_norm(record.kappa_curve(), record.budget)

    datasets = sorted({d for d, _ in per_method})
    diffs_by_dataset = []
    for dataset in datasets:
        a = per_method.get((dataset, method_a))
        b = per_method.get((dataset, method_b))
        if a is None or b is None or sorted(a) != sorted(b):
            raise ValueError(
                f"{dataset}: methods {method_a!r} and {method_b!r} must cover the same seeds"
            )
        keys = sorted(a)
        diffs_by_dataset.append((dataset,
                                 np.array([a[k] for k in keys]),
                                 np.array([b[k] for k in keys])))

    raw = []
    deltas = []
    for _, a_vals, b_vals in diffs_by_dataset:
        _, p = wilcoxon_signed_rank(a_vals, b_vals)
        raw.append(p)
        deltas.append(float((a_vals - b_vals).mean()))
    adjusted = bh_adjust(raw) if raw else np.array([])

    out = []
    for (dataset, _, _), delta, p_raw, p_adj in zip(diffs_by_dataset, deltas, raw, adjusted):
        if p_adj < alpha_level and delta > 0:
            verdict = "higher"
        elif p_adj < alpha_level and delta < 0:
            verdict = "lower"
        else:
            verdict = "none"
        out.append(SignificanceRow(dataset=dataset, delta_aulc=delta,
                                   p_raw=float(p_raw), p_adj=float(p_adj), verdict=verdict))
    return out


def write_significance_csv(rows: list, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "delta_aulc", "p_raw", "p_adj", "verdict"])
        for row in rows:
            writer.writerow([row.dataset, fmt6(row.delta_aulc), fmt6(row.p_raw),
                             fmt6(row.p_adj), row.verdict])
    return path


def emit_learning_curves(store: ResultStore, out_dir=None) -> list:
    """One CSV per (dataset, strategy, batch size) with across-seed means and
    normal-approximation 95% confidence bands for kappa."""
    records = [r for r in store.records() if not r.incomplete]
    out_dir = Path(out_dir) if out_dir is not None else store.directory / "curves"
    out_dir.mkdir(parents=True, exist_ok=True)

    groups: dict = {}
    for record in records:
        groups.setdefault((record.dataset, record.strategy, record.batch_size), []).append(record)

    written = []
    for (dataset, strategy, batch_size) in sorted(groups):
        group = sorted(groups[(dataset, strategy, batch_size)], key=lambda r: r.seed)
        n_steps = max(len(r.curve) for r in group)
        path = out_dir / f"{_run_filename(dataset, strategy, batch_size, 0).rsplit('__s', 1)[0]}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "n_labeled", "kappa_mean", "kappa_ci_low", "kappa_ci_high", "auc_mean"])
            for step in range(n_steps):
                points = [r.curve[step] for r in group if len(r.curve) > step]
                n_labeled = {p[0] for p in points}
                if len(n_labeled) != 1:
                    raise ValueError(f"{dataset}/{strategy}: seeds disagree on n_labeled at step {step}")
                kappas = np.array([p[1] for p in points], dtype=float)
                aucs = np.array([p[2] for p in points], dtype=float)
                half_width = 1.96 * _std(kappas) / math.sqrt(kappas.size)
                mean = float(kappas.mean())
                writer.writerow([
                    step, n_labeled.pop(),
                    fmt6(mean), fmt6(mean - half_width), fmt6(mean + half_width),
                    fmt6(float(aucs.mean())),
                ])
        written.append(path)
    return written
