"""End-to-end extraction protocol against a trained target classifier.

The attacker sees only a candidate pool of nodes and may ask the target
for hard labels, up to a total budget. Starting from a small stratified
set, each cycle scores the remaining pool candidates (representativeness
/ uncertainty / diversity for the rank-aggregation selector; baselines
plug into the same loop), queries the top pick(s), and continues training
an interim surrogate on the pool subgraph. A final surrogate is trained
from scratch on everything queried and judged on held-out nodes by
accuracy, fidelity to the target, and macro F1.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import NodePartition
from .errors import BudgetExceededError, ConfigError, UsageError
from .gcn import (
    GcnParams,
    TrainConfig,
    forward,
    init_params,
    predict_embed,
    train,
)
from .graph import FeatureMatrix, LabelVector, SparseGraph, induced_subgraph, normalized_adjacency
from .rng import substream, substream_seed
from .scoring import (
    DiversityConfig,
    PageRankConfig,
    PerturbationConfig,
    ScoreVector,
    diversity_scores,
    entropy_scores,
    kmeans_fit,
    pagerank,
    perturbation_scores,
)
from .selection import (
    AgeConfig,
    RankTable,
    WeightSchedule,
    adaptive_weights,
    age_density_scores,
    age_select,
    random_select,
    ranks_from_scores,
    select_top_k,
)

__all__ = [
    "ExtractionConfig",
    "ExtractionState",
    "EvalReport",
    "CycleRecord",
    "QueryOracle",
    "train_target",
    "init_query_set",
    "run_extraction",
    "train_final",
    "evaluate",
    "performance_gap",
    "run_ablation",
    "stability_statistic",
    "stability_sweep",
]

SELECTORS = ("cega", "random", "age")


@dataclass(frozen=True)
class ExtractionConfig:
    """Everything one extraction run needs beyond the dataset itself.

    ``initial_budget`` nodes are labeled before the loop starts (charged
    against ``total_budget``); each of the ceil((B - I)/per_cycle) cycles
    adds at most ``per_cycle`` more and fine-tunes the interim surrogate
    for ``interim_epochs`` epochs. ``initial_epochs`` trains the very
    first surrogate (the AGE baseline uses its own warmup length).
    """

    initial_budget: int
    total_budget: int
    per_cycle: int = 1
    interim_epochs: int = 1
    initial_epochs: int = 400
    selector: str = "cega"
    uncertainty_mode: str = "entropy"
    init_mode: str = "stratified"
    embedding_source: str = "hidden"
    ablate: str | None = None
    weight_schedule: WeightSchedule = field(default_factory=WeightSchedule)
    perturb: PerturbationConfig = field(
        default_factory=lambda: PerturbationConfig(epsilon=0.1, trials=10, seed=0)
    )
    diversity: DiversityConfig = field(default_factory=DiversityConfig)
    pagerank: PageRankConfig = field(default_factory=PageRankConfig)
    age: AgeConfig = field(default_factory=AgeConfig)
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.initial_budget <= self.total_budget:
            raise ConfigError(
                f"need 1 <= initial_budget <= total_budget, got "
                f"{self.initial_budget} and {self.total_budget}"
            )
        if self.per_cycle < 1:
            raise ConfigError("per_cycle must be >= 1")
        if self.interim_epochs < 1:
            raise ConfigError("interim_epochs must be >= 1")
        if self.initial_epochs < 1:
            raise ConfigError("initial_epochs must be >= 1")
        if self.selector not in SELECTORS:
            raise ConfigError(f"selector must be one of {SELECTORS}, got {self.selector!r}")
        if self.uncertainty_mode not in ("entropy", "perturbation"):
            raise ConfigError(f"unknown uncertainty_mode {self.uncertainty_mode!r}")
        if self.init_mode not in ("stratified", "random"):
            raise ConfigError(f"unknown init_mode {self.init_mode!r}")
        if self.embedding_source not in ("hidden", "softmax"):
            raise ConfigError(f"unknown embedding_source {self.embedding_source!r}")
        if self.ablate not in (None, "centrality", "uncertainty", "diversity"):
            raise ConfigError(f"unknown ablation target {self.ablate!r}")

    @property
    def num_cycles(self) -> int:
        span = self.total_budget - self.initial_budget
        return -(-span // self.per_cycle)  # ceil


@dataclass(frozen=True)
class ExtractionState:
    """Outcome of the query loop: the ordered queried set, the oracle's
    labels for it (parallel array), the last interim surrogate, and the
    number of cycles run."""

    queried: np.ndarray
    oracle_labels: np.ndarray
    interim: GcnParams
    cycle: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    fidelity: float
    macro_f1: float
    num_test: int

    def __post_init__(self):
        for name in ("accuracy", "fidelity", "macro_f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise UsageError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class CycleRecord:
    """One loop iteration: which nodes were added, under which selector
    weights, and (at evaluation checkpoints) how the interim model did."""

    cycle: int
    selected: np.ndarray
    weights: tuple
    interim_eval: EvalReport | None = None


class QueryOracle:
    """Hard-label access to the target, with distinct-node accounting.

    Predictions are computed once on the full graph. Re-querying a node is
    free; the count of distinct nodes ever queried may not pass ``budget``
    (None = unlimited, for reference models).
    """

    def __init__(self, target: GcnParams, graph: SparseGraph, x: FeatureMatrix, budget=None):
        pred, _, _ = predict_embed(target, graph, x)
        self._pred = pred
        self._budget = budget
        self._seen: set[int] = set()

    def query(self, nodes) -> np.ndarray:
        ids = np.asarray(nodes, dtype=np.int64)
        fresh = {int(i) for i in ids} - self._seen
        if self._budget is not None and len(self._seen) + len(fresh) > self._budget:
            raise BudgetExceededError(
                f"query of {len(fresh)} new nodes would exceed budget "
                f"{self._budget} (already used {len(self._seen)})"
            )
        self._seen |= fresh
        return self._pred[ids].copy()

    @property
    def num_queried(self) -> int:
        return len(self._seen)


def train_target(dataset, partition: NodePartition, cfg: TrainConfig) -> GcnParams:
    """Fit the target classifier on ground truth over its train split."""
    graph, x, labels = dataset
    return train(graph, x, labels, partition.target_train, cfg)


def init_query_set(pool, per_class: int, stratify_labels: LabelVector, seed: int) -> np.ndarray:
    """Draw ``per_class`` pool nodes from each ground-truth class.

    Classes with fewer pool members contribute what they have (warned).
    """
    pool = np.unique(np.asarray(list(pool), dtype=np.int64))
    if pool.size == 0:
        raise UsageError("candidate pool is empty")
    if per_class < 1:
        raise UsageError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(stratify_labels.num_classes):
        members = pool[stratify_labels.labels[pool] == c]
        if members.size < per_class:
            warnings.warn(
                f"class {c} has only {members.size} pool nodes "
                f"(wanted {per_class}); taking all of them",
                RuntimeWarning,
            )
            picked.append(members)
        else:
            picked.append(rng.choice(members, size=per_class, replace=False))
    return np.concatenate(picked)


def _local_ids(pool_ids: np.ndarray, global_ids) -> np.ndarray:
    return np.searchsorted(pool_ids, np.asarray(global_ids, dtype=np.int64))


def _fit_surrogate(sub_g, x_sub, num_classes, queried_local, labels_arr, epochs, seed, warm=None):
    full = np.zeros(x_sub.num_nodes, dtype=np.int64)
    full[queried_local] = labels_arr
    lv = LabelVector(x_sub.num_nodes, num_classes, full)
    cfg = TrainConfig(epochs=epochs, seed=seed)
    return train(sub_g, x_sub, lv, queried_local, cfg, warm_start=warm)


def run_extraction(dataset, partition: NodePartition, target: GcnParams, cfg: ExtractionConfig):
    """The iterative query loop; returns (cycle records, ExtractionState).

    The surrogate only ever sees the pool-induced subgraph; the oracle
    answers from the full graph. The pool's PageRank is model-independent
    and computed once. Cycles after the budget is exhausted keep the
    queried set fixed but still fine-tune the surrogate.
    """
    graph, x, labels = dataset
    pool_ids = partition.candidate_pool
    if cfg.total_budget > pool_ids.size:
        raise ConfigError(
            f"total_budget {cfg.total_budget} exceeds pool size {pool_ids.size}"
        )
    num_classes = labels.num_classes
    sub_g, pool_ids = induced_subgraph(graph, pool_ids)
    x_sub = FeatureMatrix(pool_ids.size, x.dim, x.values[pool_ids])
    oracle = QueryOracle(target, graph, x, budget=cfg.total_budget)

    if cfg.init_mode == "stratified":
        if cfg.initial_budget % num_classes != 0:
            raise ConfigError(
                f"stratified init needs initial_budget divisible by "
                f"{num_classes} classes, got {cfg.initial_budget}"
            )
        init_ids = init_query_set(
            pool_ids,
            cfg.initial_budget // num_classes,
            labels,
            substream_seed(cfg.seed, "init_query"),
        )
    else:
        init_ids = random_select(
            pool_ids, cfg.initial_budget, substream_seed(cfg.seed, "init_query")
        )
    queried = list(int(i) for i in init_ids)
    oracle_labels = list(int(v) for v in oracle.query(init_ids))

    interim_seed = substream_seed(cfg.seed, "interim")
    first_epochs = cfg.age.warmup_epochs if cfg.selector == "age" else cfg.initial_epochs
    if first_epochs == 0:
        model = init_params(x.dim, 16, num_classes, interim_seed)
    else:
        model = _fit_surrogate(
            sub_g, x_sub, num_classes, _local_ids(pool_ids, queried),
            np.asarray(oracle_labels), first_epochs, interim_seed,
        )

    pr_pool = pagerank(sub_g, cfg.pagerank)  # local ids; aligned with pool_ids
    pr_global = ScoreVector(node_ids=pool_ids, values=pr_pool.values)

    records: list[CycleRecord] = []
    for gamma in range(1, cfg.num_cycles + 1):
        grew = False
        sel = np.empty(0, dtype=np.int64)
        wts = (0.0, 0.0, 0.0)
        if len(queried) < cfg.total_budget:
            cands = np.setdiff1d(pool_ids, np.asarray(queried, dtype=np.int64))
            k_eff = min(cfg.per_cycle, cfg.total_budget - len(queried), cands.size)
            sel, wts = _pick(
                cfg, gamma, k_eff, cands, pool_ids, sub_g, x_sub,
                model, pr_global, queried, num_classes,
            )
            lab = oracle.query(sel)
            queried.extend(int(i) for i in sel)
            oracle_labels.extend(int(v) for v in lab)
            grew = True

        model = _fit_surrogate(
            sub_g, x_sub, num_classes, _local_ids(pool_ids, queried),
            np.asarray(oracle_labels), cfg.interim_epochs, interim_seed, warm=model,
        )

        report = None
        if grew and len(queried) % num_classes == 0:
            report = evaluate(model, target, dataset, partition.test)
        records.append(CycleRecord(cycle=gamma, selected=sel, weights=wts, interim_eval=report))

    state = ExtractionState(
        queried=np.asarray(queried, dtype=np.int64),
        oracle_labels=np.asarray(oracle_labels, dtype=np.int64),
        interim=model,
        cycle=cfg.num_cycles,
    )
    return records, state


def _pick(cfg, gamma, k_eff, cands, pool_ids, sub_g, x_sub, model, pr_global, queried, num_classes):
    """Choose k_eff of ``cands`` (sorted global ids) for cycle ``gamma``."""
    if cfg.selector == "random":
        sel = random_select(cands, k_eff, substream_seed(cfg.seed, "selector", gamma))
        return sel, (0.0, 0.0, 0.0)

    cands_local = _local_ids(pool_ids, cands)
    _, softmax_sub, hidden_sub = predict_embed(model, sub_g, x_sub)
    emb = hidden_sub if cfg.embedding_source == "hidden" else softmax_sub

    if cfg.selector == "age":
        ent = ScoreVector(cands, entropy_scores(softmax_sub, cands_local).values)
        dens = age_density_scores(
            emb[cands_local], cands, num_classes,
            substream_seed(cfg.seed, "kmeans", gamma),
        )
        cen = ScoreVector(cands, pr_global.lookup(cands))
        sel, shares = age_select(
            ent, dens, cen, t=gamma, k=k_eff,
            seed=substream_seed(cfg.seed, "selector", gamma),
            return_shares=True,
        )
        return sel, shares

    # rank-aggregation selector
    r1 = ranks_from_scores(ScoreVector(cands, pr_global.lookup(cands)), "higher_better")
    if cfg.uncertainty_mode == "entropy":
        sv2 = ScoreVector(cands, entropy_scores(softmax_sub, cands_local).values)
        r2 = ranks_from_scores(sv2, "higher_better")
    else:
        pcfg = replace(cfg.perturb, seed=substream_seed(cfg.seed, "perturb", gamma))
        sv2 = perturbation_scores(model, sub_g, x_sub, cands_local, pcfg)
        # a LOW stability count means an uncertain node: rank those first
        r2 = ranks_from_scores(ScoreVector(cands, sv2.values), "lower_better")

    q_local = _local_ids(pool_ids, queried)
    dcfg = replace(cfg.diversity, kmeans_seed=substream_seed(cfg.seed, "kmeans", gamma))
    centroids, assign = kmeans_fit(emb[q_local], num_classes, dcfg)
    sv3 = diversity_scores(emb[cands_local], cands, centroids, assign, cfg.diversity.rho)
    r3 = ranks_from_scores(sv3, "higher_better")

    w1, w2, w3 = adaptive_weights(gamma, cfg.weight_schedule)
    if cfg.ablate == "centrality":
        w1 = 0.0
    elif cfg.ablate == "uncertainty":
        w2 = 0.0
    elif cfg.ablate == "diversity":
        w3 = 0.0

    table = RankTable(node_ids=cands, rank1=r1, rank2=r2, rank3=r3)
    return select_top_k(table, (w1, w2, w3), k_eff), (w1, w2, w3)


def train_final(
    graph: SparseGraph,
    x: FeatureMatrix,
    queried_ids,
    oracle_labels,
    num_classes: int,
    cfg: TrainConfig,
) -> GcnParams:
    """Train a fresh surrogate on the queried nodes' oracle labels.

    ``graph``/``x``/``queried_ids`` share one index space (normally the
    pool subgraph). With the queried set equal to the whole pool this IS
    the full-subgraph reference model.
    """
    ids = np.asarray(queried_ids, dtype=np.int64)
    if ids.size == 0:
        raise UsageError("queried set must be non-empty")
    full = np.zeros(x.num_nodes, dtype=np.int64)
    full[ids] = np.asarray(oracle_labels, dtype=np.int64)
    lv = LabelVector(x.num_nodes, num_classes, full)
    return train(graph, x, lv, ids, cfg)


def _macro_f1(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> float:
    scores = []
    for c in range(num_classes):
        tp = int(np.sum((pred == c) & (truth == c)))
        fp = int(np.sum((pred == c) & (truth != c)))
        fn = int(np.sum((pred != c) & (truth == c)))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


def evaluate(model: GcnParams, target: GcnParams, dataset, test) -> EvalReport:
    """Judge ``model`` on the test nodes of the full graph.

    accuracy: agreement with ground truth; fidelity: agreement with the
    target's predictions; macro_f1: unweighted mean of per-class F1
    against ground truth, counting classes absent from the test set as 0.
    """
    graph, x, labels = dataset
    t = np.unique(np.asarray(list(test), dtype=np.int64))
    if t.size == 0:
        raise UsageError("test set must be non-empty")
    pred, _, _ = predict_embed(model, graph, x)
    tgt, _, _ = predict_embed(target, graph, x)
    return EvalReport(
        accuracy=float(np.mean(pred[t] == labels.labels[t])),
        fidelity=float(np.mean(pred[t] == tgt[t])),
        macro_f1=_macro_f1(pred[t], labels.labels[t], labels.num_classes),
        num_test=int(t.size),
    )


def performance_gap(full_report: EvalReport, budget_report: EvalReport):
    """Componentwise (accuracy, fidelity, macro F1) of full minus budget;
    negative entries mean the budget model won."""
    return (
        full_report.accuracy - budget_report.accuracy,
        full_report.fidelity - budget_report.fidelity,
        full_report.macro_f1 - budget_report.macro_f1,
    )


def run_ablation(dataset, partition, target, cfg: ExtractionConfig, ablate: str) -> EvalReport:
    """One full run with the named criterion's weight pinned to zero."""
    run_cfg = replace(cfg, selector="cega", ablate=ablate)
    _, state = run_extraction(dataset, partition, target, run_cfg)
    graph, x, labels = dataset
    sub_g, pool_ids = induced_subgraph(graph, partition.candidate_pool)
    x_sub = FeatureMatrix(pool_ids.size, x.dim, x.values[pool_ids])
    final = train_final(
        sub_g,
        x_sub,
        _local_ids(pool_ids, state.queried),
        state.oracle_labels,
        labels.num_classes,
        TrainConfig(seed=substream_seed(cfg.seed, "final")),
    )
    return evaluate(final, target, dataset, partition.test)


def stability_statistic(
    params: GcnParams,
    graph: SparseGraph,
    x: FeatureMatrix,
    candidates,
    epsilon: float,
    seed: int,
) -> float:
    """Worst softmax movement under one shared Gaussian feature nudge.

    Returns max over the candidates of || p(x) - p(x + noise) ||_2 with
    noise ~ N(0, epsilon^2) per entry.
    """
    ids = np.unique(np.asarray(list(candidates), dtype=np.int64))
    s = normalized_adjacency(graph)
    base = forward(params, s, x).softmax[ids]
    noise = substream(seed, "stability").standard_normal(x.values.shape)
    shaken = FeatureMatrix(x.num_nodes, x.dim, x.values + epsilon * noise)
    moved = forward(params, s, shaken).softmax[ids]
    return float(np.max(np.linalg.norm(base - moved, axis=1)))


def stability_sweep(params, graph, x, candidates, epsilons, seeds) -> np.ndarray:
    """Mean stability statistic per epsilon, averaged over the seeds."""
    out = []
    for eps in epsilons:
        vals = [
            stability_statistic(params, graph, x, candidates, eps, s) for s in seeds
        ]
        out.append(float(np.mean(vals)))
    return np.asarray(out)
