import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabal.acquisition import (
    AcquisitionConfig,
    candidate_count_hybrid,
    compute_n_proxy,
    entropy_scores,
    kmeans,
    margin_scores,
    select_coreset,
    select_hybrid,
    select_margin,
    select_proxy_hybrid,
    select_random,
)
from tabal.predictors import NeighborPredictor, neighbor_predict


def brute_margin(proba, batch_size):
    """Reference: full sort of (score, index) pairs."""
    scores = [sorted(row, reverse=True) for row in proba]
    keyed = sorted((row[0] - row[1], i) for i, row in enumerate(scores))
    return [i for _, i in keyed[: min(batch_size, len(keyed))]]


def brute_coreset(pool_x, labeled_x, batch_size):
    """Reference: recompute every min-distance from scratch at each step."""
    pool_x = np.asarray(pool_x, dtype=float)
    centers = [np.asarray(c, dtype=float) for c in labeled_x]
    remaining = list(range(len(pool_x)))
    chosen = []
    for _ in range(min(batch_size, len(pool_x))):
        best_idx, best_dist = None, -1.0
        for i in remaining:
            d = min(np.linalg.norm(pool_x[i] - c) for c in centers)
            if d > best_dist:
                best_idx, best_dist = i, d
        chosen.append(best_idx)
        centers.append(pool_x[best_idx])
        remaining.remove(best_idx)
    return chosen


class TestScores:
    def test_margin_fixture(self):
        assert margin_scores([[0.7, 0.2, 0.1]])[0] == pytest.approx(0.5)

    def test_margin_maximal_ambiguity(self):
        assert margin_scores([[0.5, 0.5]])[0] == 0.0

    def test_margin_one_hot(self):
        assert margin_scores([[0.0, 1.0, 0.0]])[0] == 1.0

    def test_margin_binary_is_absolute_difference(self):
        grid = np.linspace(0, 1, 101)
        proba = np.column_stack([grid, 1 - grid])
        assert np.allclose(margin_scores(proba), np.abs(grid - (1 - grid)), atol=1e-12)

    def test_entropy_uniform_binary(self):
        assert entropy_scores([[0.5, 0.5]])[0] == pytest.approx(math.log(2), abs=1e-6)

    def test_entropy_one_hot(self):
        assert entropy_scores([[1.0, 0.0]])[0] == pytest.approx(0.0, abs=1e-9)

    def test_entropy_uniform_four_classes(self):
        assert entropy_scores([[0.25] * 4])[0] == pytest.approx(math.log(4), abs=1e-6)

    def test_entropy_peaks_exactly_at_zero_margin(self):
        grid = np.linspace(0.01, 0.99, 99)
        proba = np.column_stack([grid, 1 - grid])
        h = entropy_scores(proba)
        m = margin_scores(proba)
        assert m[np.argmax(h)] == m.min()


class TestSelectMargin:
    def test_fixture(self):
        proba = np.array([[0.95, 0.05], [0.55, 0.45], [0.75, 0.25]])  # margins .9 .1 .5
        assert select_margin(proba, 2).tolist() == [1, 2]

    def test_exhausts_pool(self):
        proba = np.array([[0.9, 0.1], [0.6, 0.4]])
        assert sorted(select_margin(proba, 10).tolist()) == [0, 1]

    def test_tie_prefers_smaller_index(self):
        proba = np.array([[0.6, 0.4], [0.6, 0.4]])
        assert select_margin(proba, 1).tolist() == [0]

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 50))
            k = int(rng.integers(2, 6))
            proba = rng.dirichlet(np.ones(k), size=n)
            b = int(rng.integers(1, 12))
            assert select_margin(proba, b).tolist() == brute_margin(proba, b)


class TestClampFormulas:
    @pytest.mark.parametrize("pool,b,expected", [(300, 10, 150), (30, 10, 20), (10, 10, 10)])
    def test_candidate_count(self, pool, b, expected):
        assert candidate_count_hybrid(pool, b) == expected

    @pytest.mark.parametrize("pool,expected", [
        (10000, 500), (1000, 200), (150, 150), (100000, 2000),
    ])
    def test_n_proxy(self, pool, expected):
        assert compute_n_proxy(pool, 0.05, 200, 2000) == expected

    def test_n_proxy_floors_the_fraction(self):
        # 0.05 * 4010 = 200.5 -> floor 200
        assert compute_n_proxy(4010, 0.05, 1, 2000) == 200


class TestKmeans:
    def test_k1_is_the_mean(self, rng):
        x = rng.normal(size=(30, 3))
        centroids, assign = kmeans(x, 1, seed=0)
        assert np.allclose(centroids[0], x.mean(axis=0), atol=1e-9)
        assert (assign == 0).all()

    def test_two_well_separated_clusters(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        # brute force over all 2^4 assignments confirms the optimal split
        best_inertia, best_groups = np.inf, None
        for mask in range(1, 15):
            groups = [[i for i in range(4) if (mask >> i) & 1],
                      [i for i in range(4) if not (mask >> i) & 1]]
            if not groups[0] or not groups[1]:
                continue
            inertia = sum(
                ((x[g] - x[g].mean(axis=0)) ** 2).sum() for g in groups
            )
            if inertia < best_inertia:
                best_inertia, best_groups = inertia, groups
        assert sorted(map(sorted, best_groups)) == [[0, 1], [2, 3]]
        centroids, _ = kmeans(x, 2, seed=0)
        got = sorted(centroids.tolist())
        assert np.allclose(got, [[0.0, 0.5], [10.0, 0.5]], atol=1e-9)

    def test_saturated_k_gives_zero_inertia(self, rng):
        x = rng.normal(size=(6, 2))
        centroids, assign = kmeans(x, 6, seed=1)
        d = np.linalg.norm(x - centroids[assign], axis=1)
        assert d.max() < 1e-12

    def test_inertia_never_increases(self, rng):
        for seed in range(5):
            x = rng.normal(size=(40, 3))
            log = []
            kmeans(x, 4, seed=seed, inertia_log=log)
            assert all(b <= a + 1e-9 for a, b in zip(log, log[1:]))

    def test_duplicate_points_still_terminate(self):
        x = np.array([[0.0], [0.0], [0.0], [0.0], [10.0]])
        for seed in range(10):
            centroids, assign = kmeans(x, 3, seed=seed)
            assert centroids.shape == (3, 1)
            assert set(assign.tolist()) <= {0, 1, 2}

    def test_deterministic_in_seed(self, rng):
        x = rng.normal(size=(50, 4))
        a_c, a_a = kmeans(x, 5, seed=42)
        b_c, b_a = kmeans(x, 5, seed=42)
        assert np.array_equal(a_c, b_c) and np.array_equal(a_a, b_a)

    def test_restarts_pick_lower_inertia(self, rng):
        x = np.vstack([rng.normal(size=(20, 2)), rng.normal(size=(20, 2)) + 8])

        def inertia(k_seed, restarts):
            c, a = kmeans(x, 4, seed=k_seed, restarts=restarts)
            return float(((x - c[a]) ** 2).sum())

        assert inertia(3, 4) <= inertia(3, 1) + 1e-9

    def test_k_out_of_range_rejected(self, rng):
        x = rng.normal(size=(4, 2))
        with pytest.raises(ValueError):
            kmeans(x, 0, seed=0)
        with pytest.raises(ValueError):
            kmeans(x, 5, seed=0)


class TestSelectHybrid:
    def test_two_cluster_coverage(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        proba = np.full((4, 2), 0.5)  # equal entropy: every point is a candidate
        cfg = AcquisitionConfig(strategy="hybrid", seed=0)
        batch = select_hybrid(proba, x, 2, cfg)
        assert len(set(batch.tolist()) & {0, 1}) == 1
        assert len(set(batch.tolist()) & {2, 3}) == 1

    def test_b1_takes_candidate_nearest_the_mean(self, rng):
        x = rng.normal(size=(9, 2))
        proba = np.full((9, 2), 0.5)
        cfg = AcquisitionConfig(strategy="hybrid", seed=0)
        batch = select_hybrid(proba, x, 1, cfg)
        # k=1 centroid is the candidate mean; candidates are the top-entropy
        # half of the pool, which is positions 0..3 after index tie-breaking
        n_cand = candidate_count_hybrid(9, 1)
        cand = np.arange(n_cand)
        mean = x[cand].mean(axis=0)
        expected = cand[np.argmin(np.linalg.norm(x[cand] - mean, axis=1))]
        assert batch.tolist() == [expected]

    def test_claimed_candidate_skipped_by_later_centroid(self):
        from tabal.acquisition import _nearest_unique

        centroids = np.array([[0.0], [0.02]])
        candidates_x = np.array([[0.0], [0.1], [1.0]])
        picked = _nearest_unique(centroids, candidates_x, np.array([5, 7, 9]))
        assert picked.tolist() == [5, 7]  # second centroid's nearest (5) is taken

    def test_batch_size_never_exceeds_pool(self, rng):
        proba = rng.dirichlet(np.ones(3), size=4)
        cfg = AcquisitionConfig(strategy="hybrid", seed=1)
        batch = select_hybrid(proba, rng.normal(size=(4, 2)), 10, cfg)
        assert sorted(batch.tolist()) == [0, 1, 2, 3]

    def test_candidate_set_equals_top_entropy_when_pool_is_batch(self, rng):
        # with |U| = B the filter admits the whole pool and k-means saturates
        proba = rng.dirichlet(np.ones(2), size=6)
        cfg = AcquisitionConfig(strategy="hybrid", seed=2)
        batch = select_hybrid(proba, rng.normal(size=(6, 2)), 6, cfg)
        top = np.argsort(-entropy_scores(proba), kind="stable")[:6]
        assert sorted(batch.tolist()) == sorted(top.tolist())


class TestSelectProxyHybrid:
    def test_main_predictor_budget(self, rng):
        counter = CountingNeighbor()
        pool = rng.normal(size=(10000, 3))
        context = rng.normal(size=(8, 3))
        labels = rng.integers(0, 2, size=8)
        cfg = AcquisitionConfig(strategy="proxy_hybrid", seed=0)
        select_proxy_hybrid(context, labels, counter, pool, 2, 10, cfg)
        assert counter.rows == 500  # floor(0.05 * 10000), clamps inactive

    def test_degenerate_single_class_context(self, rng):
        recorder = RecordingNeighbor()
        pool = rng.normal(size=(8, 2))
        cfg = AcquisitionConfig(strategy="proxy_hybrid", seed=0,
                                filter_ratio=0.5, n_min=2, n_max_proxy=4)
        select_proxy_hybrid(np.ones((3, 2)), [1, 1, 1], recorder, pool, 2, 2, cfg)
        # one-hot proxy scores tie everywhere; the shortlist is the first
        # n_proxy pool positions by the smaller-index rule
        assert np.array_equal(recorder.queries[0], pool[[0, 1, 2, 3]])

    def test_reduces_to_hybrid_when_filters_are_inactive(self, rng):
        pool = rng.normal(size=(12, 3))
        context = rng.normal(size=(6, 3))
        labels = np.array([0, 1, 0, 1, 0, 1])
        predictor = NeighborPredictor()
        cfg = AcquisitionConfig(strategy="proxy_hybrid", seed=7,
                                filter_ratio=1.0, n_min=1, n_max_proxy=10000)
        batch_proxy = select_proxy_hybrid(context, labels, predictor, pool, 2, 6, cfg)
        proba = neighbor_predict(context, labels, pool, 2)
        batch_hybrid = select_hybrid(proba, pool, 6, cfg)
        assert np.array_equal(batch_proxy, batch_hybrid)

    def test_empty_context_rejected(self, rng):
        cfg = AcquisitionConfig(strategy="proxy_hybrid")
        with pytest.raises(ValueError, match="context"):
            select_proxy_hybrid(np.empty((0, 2)), [], NeighborPredictor(),
                                rng.normal(size=(5, 2)), 2, 2, cfg)


class CountingNeighbor:
    def __init__(self):
        self.inner = NeighborPredictor()
        self.rows = 0

    def predict_proba(self, context_x, context_y, query_x, n_classes):
        self.rows += len(query_x)
        return self.inner.predict_proba(context_x, context_y, query_x, n_classes)


class RecordingNeighbor(CountingNeighbor):
    def __init__(self):
        super().__init__()
        self.queries = []

    def predict_proba(self, context_x, context_y, query_x, n_classes):
        self.queries.append(np.asarray(query_x).copy())
        return super().predict_proba(context_x, context_y, query_x, n_classes)


class TestSelectCoreset:
    def test_one_dimensional_walkthrough(self):
        labeled = np.array([[0.0]])
        pool = np.array([[1.0], [5.0], [3.0]])
        trace = []
        batch = select_coreset(pool, labeled, 2, dmin_trace=trace)
        assert batch.tolist() == [1, 2]  # distance 5 first, then updated max 2
        assert trace[0][0] == 1.0 and trace[0][2] == 2.0
        assert np.isneginf(trace[0][1])

    def test_b1_is_the_farthest_point(self, rng):
        labeled = rng.normal(size=(3, 2))
        pool = rng.normal(size=(20, 2))
        batch = select_coreset(pool, labeled, 1)
        d = np.array([min(np.linalg.norm(p - c) for c in labeled) for p in pool])
        assert batch.tolist() == [int(np.argmax(d))]

    def test_duplicate_of_labeled_point_selected_last(self):
        labeled = np.array([[0.0]])
        pool = np.array([[0.0], [4.0], [9.0]])
        batch = select_coreset(pool, labeled, 3)
        assert batch.tolist()[-1] == 0

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 50))
            d = int(rng.integers(1, 8))
            pool = rng.normal(size=(n, d))
            labeled = rng.normal(size=(int(rng.integers(1, 10)), d))
            b = int(rng.integers(1, 12))
            assert select_coreset(pool, labeled, b).tolist() == brute_coreset(pool, labeled, b)

    def test_incremental_distances_match_naive(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 60))
            d = int(rng.integers(1, 10))
            pool = rng.normal(size=(n, d))
            labeled = rng.normal(size=(int(rng.integers(1, 8)), d))
            b = int(rng.integers(1, 10))
            trace = []
            batch = select_coreset(pool, labeled, b, dmin_trace=trace)
            centers = [c for c in labeled]
            for step, q in enumerate(batch.tolist()):
                centers.append(pool[q])
                naive = np.array([
                    min(np.linalg.norm(pool[i] - c) for c in centers) for i in range(n)
                ])
                selected = set(batch.tolist()[: step + 1])
                live = [i for i in range(n) if i not in selected]
                if live:
                    assert np.abs(trace[step][live] - naive[live]).max() <= 1e-12

    def test_empty_labeled_rejected(self, rng):
        with pytest.raises(ValueError):
            select_coreset(rng.normal(size=(3, 2)), np.empty((0, 2)), 1)


class TestSelectRandom:
    def test_deterministic(self):
        assert np.array_equal(select_random(50, 5, seed=3), select_random(50, 5, seed=3))

    def test_exhausts_pool(self):
        assert sorted(select_random(4, 10, seed=0).tolist()) == [0, 1, 2, 3]

    def test_uniform_frequencies(self):
        counts = np.zeros(4)
        for trial in range(10000):
            counts[select_random(4, 1, seed=trial)[0]] += 1
        assert np.abs(counts / 10000 - 0.25).max() < 0.03


class TestBatchValidity:
    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10**6),
        batch=st.integers(min_value=1, max_value=8),
        pool_size=st.integers(min_value=1, max_value=30),
    )
    def test_every_strategy_returns_a_valid_batch(self, seed, batch, pool_size):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 4))
        pool = rng.normal(size=(pool_size, 3))
        context = rng.normal(size=(4, 3))
        labels = rng.integers(0, k, size=4)
        proba = rng.dirichlet(np.ones(k), size=pool_size)
        cfg = AcquisitionConfig(strategy="hybrid", seed=seed)
        predictor = NeighborPredictor()

        batches = {
            "margin": select_margin(proba, batch),
            "hybrid": select_hybrid(proba, pool, batch, cfg),
            "proxy_hybrid": select_proxy_hybrid(context, labels, predictor, pool, k, batch, cfg),
            "coreset": select_coreset(pool, context, batch),
            "random": select_random(pool_size, batch, seed),
        }
        for name, chosen in batches.items():
            assert len(chosen) == min(batch, pool_size), name
            assert len(set(chosen.tolist())) == len(chosen), name
            assert all(0 <= i < pool_size for i in chosen.tolist()), name


class TestConfigValidation:
    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(strategy="oracle")

    def test_rejects_bad_ratio(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(filter_ratio=0.0)

    def test_rejects_inverted_clamps(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(n_min=10, n_max_proxy=5)
