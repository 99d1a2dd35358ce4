"""Batch acquisition strategies over an unlabeled pool.

Five selection rules share one interface: given per-point scores and/or
pool geometry, return distinct pool positions for the next labeled batch.
All score ties break toward the smaller pool index so runs replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .predictors import predict_proba
from .predictors.linear import fit_linear, linear_predict_proba

STRATEGIES = ("margin", "hybrid", "proxy_hybrid", "coreset", "random")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Strategy choice plus every tunable the selection rules consume."""

    strategy: str = "margin"
    batch_size: int = 10
    filter_ratio: float = 0.05  # proxy shortlist fraction of the pool
    n_min: int = 200  # shortlist lower clamp
    n_max_proxy: int = 2000  # shortlist upper clamp
    entropy_eps: float = 1e-12
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    kmeans_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.filter_ratio <= 1:
            raise ValueError("filter_ratio must lie in (0, 1]")
        if self.n_min > self.n_max_proxy:
            raise ValueError("n_min must not exceed n_max_proxy")
        if self.entropy_eps <= 0:
            raise ValueError("entropy_eps must be positive")


def margin_scores(proba) -> np.ndarray:
    """Gap between the two largest class probabilities of each row."""
    p = np.asarray(proba, dtype=float)
    if p.shape[1] < 2:
        raise ValueError("margin needs at least two classes")
    top2 = np.partition(p, p.shape[1] - 2, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def entropy_scores(proba, eps: float = 1e-12) -> np.ndarray:
    """Predictive entropy -sum_k p_k log(p_k + eps), natural log."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = np.asarray(proba, dtype=float)
    return -(p * np.log(p + eps)).sum(axis=1)


def _order_by_score(scores, ascending: bool = True) -> np.ndarray:
    """Pool positions sorted by score; equal scores keep index order."""
    scores = np.asarray(scores, dtype=float)
    idx = np.arange(scores.size)
    key = scores if ascending else -scores
    return np.lexsort((idx, key))


def select_margin(proba, batch_size: int) -> np.ndarray:
    """The min(B, |pool|) smallest margins."""
    scores = margin_scores(proba)
    take = min(batch_size, scores.size)
    return _order_by_score(scores, ascending=True)[:take]


def candidate_count_hybrid(pool_size: int, batch_size: int) -> int:
    """min(|U|, max(2B, floor(|U| / 2)))."""
    if pool_size < 1:
        raise ValueError("pool must be non-empty")
    return min(pool_size, max(2 * batch_size, pool_size // 2))


def compute_n_proxy(pool_size: int, filter_ratio: float = 0.05, n_min: int = 200, n_max_proxy: int = 2000) -> int:
    """min(|U|, max(N_min, min(N_max, floor(ratio * |U|))))."""
    if pool_size < 1:
        raise ValueError("pool must be non-empty")
    return min(pool_size, max(n_min, min(n_max_proxy, int(filter_ratio * pool_size))))


def _nearest_unique(centroids: np.ndarray, candidate_x: np.ndarray, candidate_idx: np.ndarray) -> np.ndarray:
    """One candidate per centroid, claimed in centroid order.

    A claimed candidate is skipped by later centroids; distance ties prefer
    the smaller pool index. Ties are structural here (the centroid of a
    two-member cluster is exactly equidistant from both members), so they are
    detected with a tolerance rather than float equality, keeping the index
    rule in charge regardless of how the distances were accumulated.
    """
    taken = np.zeros(candidate_x.shape[0], dtype=bool)
    chosen = []
    for center in centroids:
        d = np.linalg.norm(candidate_x - center, axis=1)
        d[taken] = np.inf
        best = float(d.min())
        tied = np.flatnonzero(d <= best + 1e-9 * max(best, 1.0))
        pick = tied[np.argmin(candidate_idx[tied])]
        taken[pick] = True
        chosen.append(int(candidate_idx[pick]))
    return np.asarray(chosen, dtype=np.int64)


def select_hybrid(proba, pool_x, batch_size: int, cfg: AcquisitionConfig) -> np.ndarray:
    """Entropy filter then diversity: cluster the most ambiguous candidates
    and take the nearest candidate to each centroid."""
    pool_x = np.asarray(pool_x, dtype=float)
    h = entropy_scores(proba, cfg.entropy_eps)
    n_cand = candidate_count_hybrid(pool_x.shape[0], batch_size)
    candidates = _order_by_score(h, ascending=False)[:n_cand]
    k = min(batch_size, candidates.size)
    centroids, _ = kmeans(
        pool_x[candidates], k,
        seed=cfg.seed, max_iter=cfg.kmeans_max_iter,
        tol=cfg.kmeans_tol, restarts=cfg.kmeans_restarts,
    )
    return _nearest_unique(centroids, pool_x[candidates], candidates)


def select_proxy_hybrid(
    context_x,
    context_y,
    predictor,
    pool_x,
    n_classes: int,
    batch_size: int,
    cfg: AcquisitionConfig,
) -> np.ndarray:
    """Two-stage screening: a freshly fitted linear proxy shortlists the pool
    by its own entropy, the main predictor rescores only the shortlist, and a
    diversity step picks the batch from the most ambiguous survivors.

    The main predictor therefore scores exactly compute_n_proxy(|U|) rows per
    call instead of the whole pool.
    """
    pool_x = np.asarray(pool_x, dtype=float)
    context_x = np.asarray(context_x, dtype=float)
    context_y = np.asarray(context_y, dtype=np.int64)
    if context_x.shape[0] == 0:
        raise ValueError("context must be non-empty")

    proxy = fit_linear(context_x, context_y, n_classes)
    proxy_entropy = entropy_scores(linear_predict_proba(proxy, pool_x), cfg.entropy_eps)
    n_proxy = compute_n_proxy(pool_x.shape[0], cfg.filter_ratio, cfg.n_min, cfg.n_max_proxy)
    shortlist = _order_by_score(proxy_entropy, ascending=False)[:n_proxy]

    main_proba = predict_proba(predictor, context_x, context_y, pool_x[shortlist], n_classes)
    main_entropy = entropy_scores(main_proba, cfg.entropy_eps)
    n_div = min(3 * batch_size, shortlist.size)
    order = np.lexsort((shortlist, -main_entropy))
    finalists = shortlist[order[:n_div]]

    k = min(batch_size, finalists.size)
    centroids, _ = kmeans(
        pool_x[finalists], k,
        seed=cfg.seed, max_iter=cfg.kmeans_max_iter,
        tol=cfg.kmeans_tol, restarts=cfg.kmeans_restarts,
    )
    return _nearest_unique(centroids, pool_x[finalists], finalists)


def select_coreset(pool_x, labeled_x, batch_size: int, dmin_trace=None) -> np.ndarray:
    """Greedy k-center: repeatedly take the pool point farthest from every
    labeled or already-selected point.

    Maintains one nearest-center distance per pool point (O(|U|) memory) and
    updates it incrementally after each selection. ``dmin_trace``, when a
    list, receives a copy of the distance vector after every update (selected
    positions are marked -inf).
    """
    pool_x = np.asarray(pool_x, dtype=float)
    labeled_x = np.asarray(labeled_x, dtype=float)
    if labeled_x.shape[0] == 0:
        raise ValueError("labeled set must be non-empty")
    d_min = np.full(pool_x.shape[0], np.inf)
    for center in labeled_x:
        d_min = np.minimum(d_min, np.linalg.norm(pool_x - center, axis=1))
    chosen = []
    for _ in range(min(batch_size, pool_x.shape[0])):
        q = int(np.argmax(d_min))  # first max, i.e. the smallest index on ties
        chosen.append(q)
        d_min = np.minimum(d_min, np.linalg.norm(pool_x - pool_x[q], axis=1))
        d_min[q] = -np.inf
        if dmin_trace is not None:
            dmin_trace.append(d_min.copy())
    return np.asarray(chosen, dtype=np.int64)


def select_random(pool_size: int, batch_size: int, seed: int) -> np.ndarray:
    """Uniform sample without replacement, deterministic in the seed."""
    if pool_size < 1:
        raise ValueError("pool must be non-empty")
    rng = np.random.default_rng(seed)
    return rng.choice(pool_size, size=min(batch_size, pool_size), replace=False)


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * (x @ centers.T)
    return np.maximum(sq, 0.0)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[int(rng.integers(x.shape[0]))]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0:
            i = int(rng.integers(x.shape[0]))  # all points coincide with centers
        else:
            i = int(rng.choice(x.shape[0], p=d2 / total))
        centers.append(x[i])
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(
    x,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
    restarts: int = 1,
    inertia_log=None,
):
    """Lloyd's algorithm with distance-weighted seeding.

    Empty clusters are re-seeded with the point currently farthest from its
    assigned centroid. With ``restarts`` > 1 the lowest-inertia run wins.
    ``inertia_log``, when a list, receives the post-assignment inertia of
    every Lloyd iteration (all restarts concatenated).
    """
    x = np.asarray(x, dtype=float)
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must lie in [1, {x.shape[0]}], got {k}")
    best = None
    for restart in range(restarts):
        rng = np.random.default_rng([seed, restart])
        centroids = _kmeanspp_init(x, k, rng)
        assign = np.zeros(x.shape[0], dtype=np.int64)
        inertia = np.inf
        for _ in range(max_iter):
            d2 = _sq_distances(x, centroids)
            assign = d2.argmin(axis=1)
            for j in range(k):
                if (assign == j).any():
                    continue
                current = d2[np.arange(x.shape[0]), assign]
                runaway = int(np.argmax(current))
                assign[runaway] = j
                centroids[j] = x[runaway]
                d2[:, j] = ((x - centroids[j]) ** 2).sum(axis=1)
            inertia = float(d2[np.arange(x.shape[0]), assign].sum())
            if inertia_log is not None:
                inertia_log.append(inertia)
            new_centroids = np.array([x[assign == j].mean(axis=0) for j in range(k)])
            shift = float(np.linalg.norm(new_centroids - centroids, axis=1).max())
            centroids = new_centroids
            if shift < tol:
                break
        d2 = _sq_distances(x, centroids)
        assign = d2.argmin(axis=1)
        inertia = float(d2[np.arange(x.shape[0]), assign].sum())
        if best is None or inertia < best[0]:
            best = (inertia, centroids, assign)
    return best[1], best[2]
