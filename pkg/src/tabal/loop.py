"""The pool-based protocol: seed a context with one row per class, then
query/label/update until the budget, the pool, or the small-pool rule stops
the run, evaluating on the held-out test set after every batch."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import acquisition as acq
from ._util import derive_seed
from .data import Dataset, SplitResult
from .metrics import cohen_kappa, roc_auc_ovr_macro
from .predictors import PredictorError, PredictorHandle, make_predictor, predict_proba
from .preprocess import fit_preprocessor, transform

RECORD_VERSION = 1


class LoopError(RuntimeError):
    """The run cannot start: bad split or missing classes."""


@dataclass(frozen=True)
class LoopConfig:
    budget: int = 100  # stop once the labeled context reaches this size
    batch_size: int = 10
    stop_pool_fraction: float = 0.5  # also stop after querying this share of the pool
    evaluate_at_init: bool = True


@dataclass
class RunRecord:
    """One run's trajectory: (labels, kappa, auc) per round plus bookkeeping.

    ``predictor_rows`` counts the rows scored by the main predictor for
    acquisition in the round that produced each curve point (0 for the
    initial evaluation and for geometry-only strategies).
    """

    dataset: str
    strategy: str
    seed: int
    batch_size: int
    budget: int
    curve: list = field(default_factory=list)  # [(n_labeled, kappa, auc), ...]
    round_seconds: list = field(default_factory=list)
    predictor_rows: list = field(default_factory=list)
    incomplete: bool = False
    note: str = ""

    @property
    def key(self) -> tuple:
        return (self.dataset, self.strategy, self.batch_size, self.seed)

    def kappa_curve(self) -> list:
        return [(n, kappa) for n, kappa, _ in self.curve]

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "record_version": RECORD_VERSION,
            "dataset": self.dataset,
            "strategy": self.strategy,
            "seed": int(self.seed),
            "batch_size": int(self.batch_size),
            "budget": int(self.budget),
            "curve": [[int(n), clean(kappa), clean(auc)] for n, kappa, auc in self.curve],
            "round_seconds": [float(s) for s in self.round_seconds],
            "predictor_rows": [int(c) for c in self.predictor_rows],
            "incomplete": self.incomplete,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunRecord":
        if payload.get("record_version") != RECORD_VERSION:
            raise ValueError(f"unsupported record version {payload.get('record_version')!r}")

        def restore(x):
            return math.nan if x is None else float(x)

        return cls(
            dataset=payload["dataset"],
            strategy=payload["strategy"],
            seed=payload["seed"],
            batch_size=payload["batch_size"],
            budget=payload["budget"],
            curve=[(n, restore(kappa), restore(auc)) for n, kappa, auc in payload["curve"]],
            round_seconds=list(payload["round_seconds"]),
            predictor_rows=list(payload["predictor_rows"]),
            incomplete=payload.get("incomplete", False),
            note=payload.get("note", ""),
        )


class _CountingPredictor:
    """Pass-through wrapper tallying how many rows were scored."""

    def __init__(self, inner):
        self.inner = inner
        self.rows = 0

    def predict_proba(self, context_x, context_y, query_x, n_classes):
        self.rows += int(np.asarray(query_x).shape[0])
        return self.inner.predict_proba(context_x, context_y, query_x, n_classes)


def init_context(pool_indices, labels, n_classes: int, seed: int) -> np.ndarray:
    """One uniformly chosen pool row per class, in class order."""
    pool_indices = np.asarray(pool_indices, dtype=np.int64)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(n_classes):
        members = pool_indices[labels[pool_indices] == c]
        if members.size == 0:
            raise LoopError(f"class {c} missing from the pool")
        chosen.append(int(rng.choice(members)))
    return np.asarray(chosen, dtype=np.int64)


def run_active_loop(
    ds: Dataset,
    split: SplitResult,
    predictor,
    loop_cfg: LoopConfig,
    acq_cfg: acq.AcquisitionConfig,
    seed: int,
) -> RunRecord:
    """Execute one full acquisition run and return its trajectory.

    The preprocessing pipeline is fitted on the split's pool rows before any
    querying; queried rows leave the pool permanently and their ground-truth
    labels join the context. A predictor failure ends the run early with the
    partial record flagged incomplete.
    """
    if isinstance(predictor, PredictorHandle):
        predictor = make_predictor(predictor)
    n_classes = ds.n_classes
    model = fit_preprocessor(ds, split.pool_indices)
    z = transform(model, ds.rows)
    test_idx = np.asarray(split.test_indices, dtype=np.int64)
    test_x = z[test_idx]
    test_y = ds.labels[test_idx]

    init_rows = init_context(split.pool_indices, ds.labels, n_classes, derive_seed(seed, "init"))
    context_rows = [int(r) for r in init_rows]
    initial = set(context_rows)
    pool = [int(r) for r in split.pool_indices if int(r) not in initial]
    pool_size_0 = len(pool)

    counting = _CountingPredictor(predictor)
    record = RunRecord(
        dataset=ds.name,
        strategy=acq_cfg.strategy,
        seed=seed,
        batch_size=loop_cfg.batch_size,
        budget=loop_cfg.budget,
    )

    def evaluate() -> tuple:
        proba = predict_proba(predictor, z[context_rows], ds.labels[context_rows], test_x, n_classes)
        predicted = proba.argmax(axis=1)
        return cohen_kappa(test_y, predicted), roc_auc_ovr_macro(test_y, proba)

    queried = 0
    round_index = 0
    try:
        if loop_cfg.evaluate_at_init:
            started = time.perf_counter()
            kappa, auc = evaluate()
            record.curve.append((len(context_rows), kappa, auc))
            record.round_seconds.append(time.perf_counter() - started)
            record.predictor_rows.append(0)

        while (
            len(context_rows) < loop_cfg.budget
            and pool
            and queried < loop_cfg.stop_pool_fraction * pool_size_0
        ):
            round_index += 1
            started = time.perf_counter()
            batch = min(loop_cfg.batch_size, loop_cfg.budget - len(context_rows))
            cfg_round = replace(
                acq_cfg,
                batch_size=batch,
                seed=derive_seed(seed, "round", round_index),
            )
            scored_before = counting.rows
            pool_arr = np.asarray(pool, dtype=np.int64)
            pool_x = z[pool_arr]
            context_x = z[context_rows]
            context_y = ds.labels[context_rows]

            if cfg_round.strategy == "margin":
                proba = predict_proba(counting, context_x, context_y, pool_x, n_classes)
                positions = acq.select_margin(proba, batch)
            elif cfg_round.strategy == "hybrid":
                proba = predict_proba(counting, context_x, context_y, pool_x, n_classes)
                positions = acq.select_hybrid(proba, pool_x, batch, cfg_round)
            elif cfg_round.strategy == "proxy_hybrid":
                positions = acq.select_proxy_hybrid(
                    context_x, context_y, counting, pool_x, n_classes, batch, cfg_round
                )
            elif cfg_round.strategy == "coreset":
                positions = acq.select_coreset(pool_x, context_x, batch)
            elif cfg_round.strategy == "random":
                positions = acq.select_random(len(pool), batch, cfg_round.seed)
            else:
                raise ValueError(f"unknown strategy {cfg_round.strategy!r}")

            queried_rows = [int(r) for r in pool_arr[positions]]
            context_rows.extend(queried_rows)  # oracle: ground-truth labels revealed
            taken = set(queried_rows)
            pool = [r for r in pool if r not in taken]
            queried += len(queried_rows)

            kappa, auc = evaluate()
            record.curve.append((len(context_rows), kappa, auc))
            record.round_seconds.append(time.perf_counter() - started)
            record.predictor_rows.append(counting.rows - scored_before)
    except PredictorError as exc:
        record.incomplete = True
        record.note = str(exc)

    return record
