"""Tests for ranking, the weight schedule, top-k selection, and the
Random/AGE baseline selectors."""

import math

import numpy as np
import pytest

from graphextract.errors import UsageError
from graphextract.scoring import ScoreVector
from graphextract.selection import (
    RankTable,
    WeightSchedule,
    adaptive_weights,
    age_density_scores,
    age_select,
    percentile_transform,
    random_select,
    ranks_from_scores,
    select_top_k,
)


def sv(ids, vals):
    return ScoreVector(node_ids=np.asarray(ids), values=np.asarray(vals, dtype=float))


# ---------------------------------------------------------------- ranks


def test_ranks_higher_better():
    ranks = ranks_from_scores(sv([0, 1, 2], [0.3, 0.9, 0.1]), "higher_better")
    np.testing.assert_array_equal(ranks, [2, 1, 3])


def test_ranks_tie_breaks_by_id():
    ranks = ranks_from_scores(sv([2, 7], [5.0, 5.0]), "higher_better")
    np.testing.assert_array_equal(ranks, [1, 2])
    # same scores, ids swapped in storage order: still id 2 first
    ranks = ranks_from_scores(sv([7, 2], [5.0, 5.0]), "higher_better")
    np.testing.assert_array_equal(ranks, [2, 1])


def test_ranks_lower_better():
    ranks = ranks_from_scores(sv([0, 1, 2], [1.0, 2.0, 3.0]), "lower_better")
    np.testing.assert_array_equal(ranks, [1, 2, 3])


def test_ranks_always_permutation():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = int(rng.integers(1, 30))
        vals = rng.integers(0, 4, size=m).astype(float)  # force ties
        ranks = ranks_from_scores(sv(np.arange(m), vals), "higher_better")
        np.testing.assert_array_equal(np.sort(ranks), np.arange(1, m + 1))


def test_ranks_invalid_direction():
    with pytest.raises(UsageError):
        ranks_from_scores(sv([0], [1.0]), "sideways")


def test_rank_table_validates_permutation():
    with pytest.raises(UsageError):
        RankTable(
            node_ids=np.array([0, 1]),
            rank1=np.array([1, 1]),
            rank2=np.array([1, 2]),
            rank3=np.array([2, 1]),
        )


# ---------------------------------------------------------------- weights


def test_weights_cycle_one():
    w1, w2, w3 = adaptive_weights(1)
    assert abs(w1 - (0.2 + 0.6 * math.exp(-0.3))) < 1e-12
    assert abs(w2 - (0.2 + 0.6 * (1.0 - math.exp(-0.3)))) < 1e-12
    assert abs(w3 - 0.2 * (1.0 - math.exp(-1.0))) < 1e-12


def test_weights_limit():
    w1, w2, w3 = adaptive_weights(100)
    assert abs(w1 - 0.2) < 1e-6
    assert abs(w2 - 0.8) < 1e-6
    assert abs(w3 - 0.2) < 1e-6


def test_weights_delta_zero_degenerates():
    sched = WeightSchedule(delta=0.0)
    for g in (1, 5, 50):
        w1, w2, _ = adaptive_weights(g, sched)
        assert w1 == 0.2 and w2 == 0.2


def test_weights_monotone_in_cycle():
    prev = adaptive_weights(1)
    for g in range(2, 30):
        cur = adaptive_weights(g)
        assert cur[0] < prev[0]
        assert cur[1] > prev[1]
        assert cur[2] > prev[2]
        prev = cur


def test_weights_reject_bad_inputs():
    with pytest.raises(UsageError):
        adaptive_weights(0)
    with pytest.raises(UsageError):
        WeightSchedule(lam=0.0)


# ---------------------------------------------------------------- top-k


def test_select_identical_columns_is_plain_ranking():
    r = np.array([3, 1, 2])
    table = RankTable(node_ids=np.array([10, 11, 12]), rank1=r, rank2=r, rank3=r)
    got = select_top_k(table, (0.5, 0.3, 0.2), 2)
    np.testing.assert_array_equal(got, [11, 12])


def test_select_tie_prefers_smaller_id():
    table = RankTable(
        node_ids=np.array([4, 9]),
        rank1=np.array([1, 2]),
        rank2=np.array([2, 1]),
        rank3=np.array([1, 2]),
    )
    got = select_top_k(table, (1.0, 1.0, 0.0), 2)
    np.testing.assert_array_equal(got, [4, 9])


def test_select_hand_arithmetic():
    table = RankTable(
        node_ids=np.array([0, 1, 2]),
        rank1=np.array([1, 3, 2]),
        rank2=np.array([3, 1, 2]),
        rank3=np.array([2, 1, 3]),
    )
    got = select_top_k(table, (0.6, 0.3, 0.1), 1)
    np.testing.assert_array_equal(got, [0])  # combined (1.7, 2.2, 2.1)
    got3 = select_top_k(table, (0.6, 0.3, 0.1), 3)
    np.testing.assert_array_equal(got3, [0, 2, 1])


def test_select_k_too_large_rejected():
    table = RankTable(
        node_ids=np.array([0]), rank1=np.array([1]), rank2=np.array([1]), rank3=np.array([1])
    )
    with pytest.raises(UsageError):
        select_top_k(table, (1, 1, 1), 2)


def test_select_invariant_to_weight_scaling():
    rng = np.random.default_rng(6)
    m = 20
    cols = [rng.permutation(m) + 1 for _ in range(3)]
    table = RankTable(np.arange(m), *cols)
    base = select_top_k(table, (0.5, 0.3, 0.2), 7)
    scaled = select_top_k(table, (5.0, 3.0, 2.0), 7)
    np.testing.assert_array_equal(base, scaled)


def test_select_invariant_to_monotone_score_transform():
    rng = np.random.default_rng(14)
    vals = rng.standard_normal(15)
    ids = np.arange(15)
    r_raw = ranks_from_scores(sv(ids, vals), "higher_better")
    r_exp = ranks_from_scores(sv(ids, np.exp(vals)), "higher_better")
    np.testing.assert_array_equal(r_raw, r_exp)


# ---------------------------------------------------------------- random


def test_random_select_whole_set():
    got = random_select([5, 3, 8], 3, seed=0)
    assert set(got.tolist()) == {3, 5, 8}


def test_random_select_deterministic():
    a = random_select(range(50), 10, seed=42)
    b = random_select(range(50), 10, seed=42)
    np.testing.assert_array_equal(a, b)
    c = random_select(range(50), 10, seed=43)
    assert not np.array_equal(a, c)


def test_random_select_uniform_frequencies():
    counts = np.zeros(10)
    for seed in range(10_000):
        counts[random_select(range(10), 1, seed)[0]] += 1
    freq = counts / 10_000
    assert np.all(np.abs(freq - 0.1) <= 0.01)


def test_random_select_too_many_rejected():
    with pytest.raises(UsageError):
        random_select([1, 2], 3, seed=0)


# ---------------------------------------------------------------- AGE


def test_percentile_transform_basic():
    got = percentile_transform([10.0, 30.0, 20.0])
    np.testing.assert_allclose(got, [1.0 / 3.0, 1.0, 2.0 / 3.0])


def test_age_nt_formula():
    assert abs((1.05 - 0.95**1) - 0.10) < 1e-12


def test_age_alpha_beta_gamma_sum_to_one():
    # for any drawn gamma the shares sum to 1 by construction
    for t in (1, 3, 10):
        n_t = 1.05 - 0.95**t
        u = float(np.random.default_rng(t).random())
        gamma = 1.0 - u ** (1.0 / n_t)
        alpha = beta = (1.0 - gamma) / 2.0
        assert abs(alpha + beta + gamma - 1.0) < 1e-12
        assert 0.0 <= gamma <= 1.0


def test_age_gamma_override_selects_by_centrality():
    ids = [0, 1, 2, 3]
    ent = sv(ids, [0.9, 0.1, 0.5, 0.3])
    den = sv(ids, [0.2, 0.8, 0.1, 0.9])
    cen = sv(ids, [0.1, 0.2, 0.9, 0.4])
    got = age_select(ent, den, cen, t=1, k=2, seed=0, gamma_override=1.0)
    np.testing.assert_array_equal(got, [2, 3])


def test_age_deterministic_and_mismatch_rejected():
    ids = [0, 1, 2]
    ent = sv(ids, [0.5, 0.2, 0.9])
    den = sv(ids, [0.3, 0.6, 0.1])
    cen = sv(ids, [0.4, 0.4, 0.4])
    a = age_select(ent, den, cen, t=2, k=2, seed=7)
    b = age_select(ent, den, cen, t=2, k=2, seed=7)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(UsageError):
        age_select(ent, den, sv([0, 1, 9], [1, 2, 3]), t=1, k=1, seed=0)


def test_age_density_prefers_cluster_cores():
    rng = np.random.default_rng(3)
    tight = rng.standard_normal((20, 2)) * 0.05
    outlier = np.array([[30.0, 30.0]])
    emb = np.vstack([tight, outlier])
    dens = age_density_scores(emb, np.arange(21), num_classes=2, kmeans_seed=1)
    # the lone far point is its own center (distance 0) or far from both;
    # every tight-cluster point must beat a mid-distance ghost anyway
    assert dens.values[:20].mean() > 0.5
    assert np.all(dens.values <= 1.0)
