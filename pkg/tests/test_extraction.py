"""Tests for the extraction loop, oracle accounting, and evaluation."""

import numpy as np
import pytest

from graphextract.datagen import SbmConfig, generate_sbm, split_partition
from graphextract.errors import BudgetExceededError, ConfigError, UsageError
from graphextract.extraction import (
    EvalReport,
    ExtractionConfig,
    QueryOracle,
    evaluate,
    init_query_set,
    performance_gap,
    run_ablation,
    run_extraction,
    stability_statistic,
    stability_sweep,
    train_final,
    train_target,
)
from graphextract.gcn import GcnParams, TrainConfig
from graphextract.graph import FeatureMatrix, LabelVector, build_csr, induced_subgraph
from graphextract.rng import substream_seed
from graphextract.selection import WeightSchedule


@pytest.fixture(scope="module")
def world():
    """Separable three-community graph with a trained target model."""
    cfg = SbmConfig(
        num_nodes=60,
        num_classes=3,
        intra_p=1.0,
        inter_p=0.0,
        feature_dim=8,
        feature_separation=5.0,
        noise_sigma=0.5,
    )
    dataset = generate_sbm(cfg, seed=100)
    part = split_partition(60, 0.4, 0.6, seed=100)
    target = train_target(
        dataset, part, TrainConfig(epochs=500, seed=substream_seed(100, "target"))
    )
    return dataset, part, target


def run_cfg(**over):
    base = dict(initial_budget=6, total_budget=12, seed=5)
    base.update(over)
    return ExtractionConfig(**base)


# ---------------------------------------------------------------- target/oracle


def test_target_learns_separable_data(world):
    dataset, part, target = world
    rep = evaluate(target, target, dataset, part.test)
    assert rep.accuracy >= 0.95
    assert rep.fidelity == 1.0  # anything agrees with itself


def test_target_deterministic(world):
    dataset, part, _ = world
    cfg = TrainConfig(epochs=50, seed=7)
    a = train_target(dataset, part, cfg)
    b = train_target(dataset, part, cfg)
    np.testing.assert_array_equal(a.w1, b.w1)


def test_target_empty_train_rejected(world):
    dataset, part, _ = world
    bad = type(part)(
        candidate_pool=part.candidate_pool, target_train=np.array([], dtype=np.int64),
        test=part.test,
    )
    with pytest.raises(UsageError):
        train_target(dataset, bad, TrainConfig(epochs=1, seed=0))


def test_oracle_counts_distinct_nodes_once(world):
    dataset, part, target = world
    graph, x, _ = dataset
    oracle = QueryOracle(target, graph, x, budget=3)
    a = oracle.query([1, 2])
    b = oracle.query([2, 1])
    np.testing.assert_array_equal(a, b[::-1])
    assert oracle.num_queried == 2
    oracle.query([3])
    with pytest.raises(BudgetExceededError):
        oracle.query([4])
    assert oracle.num_queried == 3  # failed call charged nothing


def test_oracle_matches_ground_truth_on_pool(world):
    dataset, part, target = world
    graph, x, labels = dataset
    oracle = QueryOracle(target, graph, x)
    got = oracle.query(part.candidate_pool)
    assert np.mean(got == labels.labels[part.candidate_pool]) >= 0.95


# ---------------------------------------------------------------- init set


def test_init_whole_tiny_pool():
    labels = LabelVector(4, 2, [0, 0, 1, 1])
    got = init_query_set([0, 1, 2, 3], 2, labels, seed=0)
    assert sorted(got.tolist()) == [0, 1, 2, 3]


def test_init_short_class_warns_and_shrinks():
    labels = LabelVector(5, 2, [0, 0, 0, 0, 1])
    with pytest.warns(RuntimeWarning):
        got = init_query_set([0, 1, 2, 3, 4], 2, labels, seed=1)
    assert got.size == 3  # 2 from class 0, the single class-1 node
    assert 4 in got.tolist()


def test_init_deterministic(world):
    dataset, part, _ = world
    labels = dataset[2]
    a = init_query_set(part.candidate_pool, 2, labels, seed=9)
    b = init_query_set(part.candidate_pool, 2, labels, seed=9)
    np.testing.assert_array_equal(a, b)


def test_init_empty_pool_rejected():
    labels = LabelVector(2, 2, [0, 1])
    with pytest.raises(UsageError):
        init_query_set([], 2, labels, seed=0)


# ---------------------------------------------------------------- loop


def test_budget_equal_to_initial_runs_zero_cycles(world):
    dataset, part, target = world
    cfg = run_cfg(total_budget=6)
    records, state = run_extraction(dataset, part, target, cfg)
    assert records == []
    assert state.queried.size == 6
    assert state.cycle == 0


def test_three_extra_budget_three_growing_cycles(world):
    dataset, part, target = world
    cfg = run_cfg(total_budget=9)
    records, state = run_extraction(dataset, part, target, cfg)
    assert len(records) == 3
    assert all(r.selected.size == 1 for r in records)
    assert state.queried.size == 9
    assert np.unique(state.queried).size == 9  # strictly growing chain


def test_full_run_budget_accounting(world):
    dataset, part, target = world
    cfg = run_cfg()
    records, state = run_extraction(dataset, part, target, cfg)
    assert state.queried.size == 12
    assert np.unique(state.queried).size == 12
    assert all(np.isin(state.queried, part.candidate_pool).tolist())
    # interim evaluations appear exactly when |queried| is a multiple of C
    sizes = 6 + np.arange(1, 7)
    for rec, size in zip(records, sizes):
        assert (rec.interim_eval is not None) == (size % 3 == 0)


def test_run_deterministic(world):
    dataset, part, target = world
    cfg = run_cfg()
    rec1, st1 = run_extraction(dataset, part, target, cfg)
    rec2, st2 = run_extraction(dataset, part, target, cfg)
    np.testing.assert_array_equal(st1.queried, st2.queried)
    np.testing.assert_array_equal(st1.oracle_labels, st2.oracle_labels)
    np.testing.assert_array_equal(st1.interim.w1, st2.interim.w1)
    for a, b in zip(rec1, rec2):
        np.testing.assert_array_equal(a.selected, b.selected)
        assert a.weights == b.weights


def test_selection_is_budget_independent_prefix(world):
    # the loop never looks at total_budget when scoring, so a smaller
    # budget must yield a prefix of a larger budget's queried sequence
    dataset, part, target = world
    _, small = run_extraction(dataset, part, target, run_cfg(total_budget=9))
    _, large = run_extraction(dataset, part, target, run_cfg(total_budget=12))
    np.testing.assert_array_equal(small.queried, large.queried[:9])


def test_per_cycle_batching(world):
    dataset, part, target = world
    cfg = run_cfg(per_cycle=4)  # spans 6 -> 12 in cycles of 4 then 2
    records, state = run_extraction(dataset, part, target, cfg)
    assert [r.selected.size for r in records] == [4, 2]
    assert state.queried.size == 12


def test_random_and_age_selectors_run(world):
    dataset, part, target = world
    for sel in ("random", "age"):
        records, state = run_extraction(dataset, part, target, run_cfg(selector=sel))
        assert state.queried.size == 12
        assert np.unique(state.queried).size == 12
    # the two selectors disagree with rank aggregation somewhere
    _, cega = run_extraction(dataset, part, target, run_cfg())
    _, rand = run_extraction(dataset, part, target, run_cfg(selector="random"))
    assert not np.array_equal(cega.queried, rand.queried)


def test_perturbation_uncertainty_mode_runs(world):
    dataset, part, target = world
    cfg = run_cfg(uncertainty_mode="perturbation")
    _, state = run_extraction(dataset, part, target, cfg)
    assert state.queried.size == 12


def test_softmax_embedding_source_runs(world):
    dataset, part, target = world
    _, state = run_extraction(dataset, part, target, run_cfg(embedding_source="softmax"))
    assert state.queried.size == 12


def test_budget_exceeding_pool_rejected(world):
    dataset, part, target = world
    with pytest.raises(ConfigError):
        run_extraction(dataset, part, target, run_cfg(total_budget=1000))


def test_stratified_requires_divisible_budget(world):
    dataset, part, target = world
    with pytest.raises(ConfigError):
        run_extraction(dataset, part, target, run_cfg(initial_budget=7, total_budget=12))


def test_random_init_mode_allows_any_budget(world):
    dataset, part, target = world
    cfg = run_cfg(initial_budget=7, total_budget=10, init_mode="random")
    _, state = run_extraction(dataset, part, target, cfg)
    assert state.queried.size == 10


def test_all_zero_weights_degenerate_to_id_order(world):
    dataset, part, target = world
    sched = WeightSchedule(alpha1=0.0, alpha2=0.0, alpha3=0.0, delta=0.0)
    cfg = run_cfg(total_budget=8, weight_schedule=sched)
    with pytest.warns(RuntimeWarning):
        records, _ = run_extraction(dataset, part, target, cfg)
    # each cycle takes the smallest unqueried pool id
    pool = np.sort(part.candidate_pool)
    init = set(run_extraction(dataset, part, target, run_cfg(total_budget=6))[1].queried.tolist())
    expect_first = min(int(p) for p in pool if int(p) not in init)
    assert records[0].selected[0] == expect_first


# ---------------------------------------------------------------- final model


def test_final_training_deterministic_and_accurate(world):
    dataset, part, target = world
    graph, x, labels = dataset
    records, state = run_extraction(dataset, part, target, run_cfg(total_budget=6))
    sub_g, pool_ids = induced_subgraph(graph, part.candidate_pool)
    x_sub = FeatureMatrix(pool_ids.size, x.dim, x.values[pool_ids])
    local = np.searchsorted(pool_ids, state.queried)
    cfg = TrainConfig(epochs=500, seed=substream_seed(5, "final"))
    a = train_final(sub_g, x_sub, local, state.oracle_labels, 3, cfg)
    b = train_final(sub_g, x_sub, local, state.oracle_labels, 3, cfg)
    np.testing.assert_array_equal(a.w1, b.w1)
    # two labeled nodes per class on separable data is already plenty
    rep = evaluate(a, target, dataset, part.test)
    assert rep.accuracy >= 0.8


def test_final_rejects_empty_queried(world):
    dataset, part, _ = world
    graph, x, _ = dataset
    with pytest.raises(UsageError):
        train_final(graph, x, [], [], 3, TrainConfig(epochs=1, seed=0))


# ---------------------------------------------------------------- metrics


def constant_class_model(d, c, pick):
    b2 = np.zeros(c)
    b2[pick] = 1.0
    return GcnParams(w1=np.zeros((d, 16)), w2=np.zeros((16, c)), b2=b2, hidden_dim=16)


def test_evaluate_constant_model_hand_values():
    g = build_csr([(0, 1), (2, 3)], 4, undirected=True)
    x = FeatureMatrix(4, 2, np.ones((4, 2)))
    labels = LabelVector(4, 2, [0, 0, 1, 1])
    model = constant_class_model(2, 2, pick=0)
    rep = evaluate(model, model, (g, x, labels), [0, 1, 2, 3])
    assert rep.accuracy == 0.5
    assert rep.fidelity == 1.0
    assert abs(rep.macro_f1 - 1.0 / 3.0) < 1e-12
    assert rep.num_test == 4


def test_macro_f1_matches_sklearn():
    from sklearn.metrics import f1_score

    rng = np.random.default_rng(3)
    n, c = 200, 5
    g = build_csr([], n, undirected=True)
    x = FeatureMatrix(n, 1, np.zeros((n, 1)))
    truth = LabelVector(n, c, rng.integers(0, c, size=n))
    # random fixed prediction via a crafted constant... instead check the
    # helper through evaluate by replaying predictions as a fake model is
    # awkward; compare the internal scorer directly
    from graphextract.extraction import _macro_f1

    pred = rng.integers(0, c, size=n)
    ours = _macro_f1(pred, truth.labels, c)
    ref = f1_score(truth.labels, pred, average="macro", labels=list(range(c)))
    assert abs(ours - ref) < 1e-12


def test_evaluate_empty_test_rejected(world):
    dataset, part, target = world
    with pytest.raises(UsageError):
        evaluate(target, target, dataset, [])


def test_performance_gap_arithmetic():
    a = EvalReport(accuracy=0.9, fidelity=0.95, macro_f1=0.8, num_test=10)
    b = EvalReport(accuracy=0.9, fidelity=0.90, macro_f1=0.85, num_test=10)
    assert performance_gap(a, a) == (0.0, 0.0, 0.0)
    da, df, d1 = performance_gap(a, b)
    assert abs(df - 0.05) < 1e-12 and abs(da) < 1e-12 and abs(d1 + 0.05) < 1e-12


def test_eval_report_validates_range():
    with pytest.raises(UsageError):
        EvalReport(accuracy=1.2, fidelity=0.5, macro_f1=0.5, num_test=1)


# ---------------------------------------------------------------- ablation


def test_ablation_runs_each_criterion(world):
    dataset, part, target = world
    cfg = run_cfg(total_budget=9)
    for which in ("centrality", "uncertainty", "diversity"):
        rep = run_ablation(dataset, part, target, cfg, which)
        assert 0.0 <= rep.fidelity <= 1.0


# ---------------------------------------------------------------- stability


def test_stability_statistic_small_for_tiny_noise(world):
    dataset, part, target = world
    graph, x, _ = dataset
    val = stability_statistic(target, graph, x, part.candidate_pool, 1e-6, seed=0)
    assert 0.0 <= val < 1e-3


def test_stability_sweep_shape_and_growth(world):
    dataset, part, target = world
    graph, x, _ = dataset
    eps = [1e-4, 1e-1]
    means = stability_sweep(target, graph, x, part.candidate_pool, eps, seeds=range(5))
    assert means.shape == (2,)
    assert means[0] <= means[1]
