"""Turning scores into queries: rank construction, the adaptive weight
schedule, weighted-rank top-k selection, and the Random and AGE baseline
selectors."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .scoring import DiversityConfig, ScoreVector, kmeans_fit

__all__ = [
    "WeightSchedule",
    "RankTable",
    "AgeConfig",
    "ranks_from_scores",
    "adaptive_weights",
    "select_top_k",
    "random_select",
    "percentile_transform",
    "age_density_scores",
    "age_select",
]


@dataclass(frozen=True)
class WeightSchedule:
    """Coefficients of the cycle-indexed weight formulas.

    w1(g) = alpha1 + delta * exp(-lam * g)   (decays toward alpha1)
    w2(g) = alpha2 + delta * (1 - exp(-lam * g))
    w3(g) = alpha3 * (1 - exp(-g))
    """

    alpha1: float = 0.2
    alpha2: float = 0.2
    alpha3: float = 0.2
    delta: float = 0.6
    lam: float = 0.3

    def __post_init__(self):
        vals = (self.alpha1, self.alpha2, self.alpha3, self.delta, self.lam)
        if not all(math.isfinite(v) for v in vals):
            raise UsageError("schedule coefficients must be finite")
        if self.lam <= 0.0:
            raise UsageError("lam must be > 0")


@dataclass(frozen=True)
class RankTable:
    """Three parallel rank columns over one candidate set; rank 1 = most
    preferred. Each column must be a permutation of 1..m."""

    node_ids: np.ndarray
    rank1: np.ndarray
    rank2: np.ndarray
    rank3: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.node_ids, dtype=np.int64)
        object.__setattr__(self, "node_ids", ids)
        m = ids.size
        expect = np.arange(1, m + 1)
        for col in ("rank1", "rank2", "rank3"):
            r = np.asarray(getattr(self, col), dtype=np.int64)
            if r.shape != (m,) or not np.array_equal(np.sort(r), expect):
                raise UsageError(f"{col} is not a permutation of 1..{m}")
            object.__setattr__(self, col, r)


@dataclass(frozen=True)
class AgeConfig:
    """Baseline-selector knobs; the combined score mixes entropy,
    embedding-density, and PageRank percentiles."""

    warmup_epochs: int = 400

    def __post_init__(self):
        if self.warmup_epochs < 0:
            raise UsageError("warmup_epochs must be >= 0")


def ranks_from_scores(scores: ScoreVector, direction: str) -> np.ndarray:
    """Rank positions (1 = most preferred), ties broken by ascending id."""
    if direction not in ("higher_better", "lower_better"):
        raise UsageError(f"unknown direction {direction!r}")
    if scores.node_ids.size == 0:
        raise UsageError("cannot rank an empty score vector")
    key = -scores.values if direction == "higher_better" else scores.values
    order = np.lexsort((scores.node_ids, key))
    ranks = np.empty(order.size, dtype=np.int64)
    ranks[order] = np.arange(1, order.size + 1)
    return ranks


def adaptive_weights(gamma: int, sched: WeightSchedule = WeightSchedule()):
    """Evaluate the three weight formulas at cycle ``gamma`` (>= 1).

    The weights are deliberately not normalized; only their ratios matter
    to the argmin and the formulas do not sum to 1.
    """
    if gamma < 1:
        raise UsageError("gamma must be >= 1")
    decay = math.exp(-sched.lam * gamma)
    w1 = sched.alpha1 + sched.delta * decay
    w2 = sched.alpha2 + sched.delta * (1.0 - decay)
    w3 = sched.alpha3 * (1.0 - math.exp(-float(gamma)))
    return w1, w2, w3


def select_top_k(table: RankTable, weights, k: int) -> np.ndarray:
    """The k candidates minimizing the weighted rank sum.

    Returned best-first; ties broken by ascending node id.
    """
    m = table.node_ids.size
    if k > m:
        raise UsageError(f"cannot select {k} from {m} candidates")
    w1, w2, w3 = weights
    if w1 == 0.0 and w2 == 0.0 and w3 == 0.0:
        warnings.warn(
            "all selection weights are zero; selection degenerates to id order",
            RuntimeWarning,
        )
    combined = w1 * table.rank1 + w2 * table.rank2 + w3 * table.rank3
    order = np.lexsort((table.node_ids, combined))
    return table.node_ids[order[:k]].copy()


def random_select(candidates, k: int, seed: int) -> np.ndarray:
    """Uniform sample of k distinct candidates, deterministic under seed."""
    pool = np.unique(np.asarray(list(candidates), dtype=np.int64))
    if k > pool.size:
        raise UsageError(f"cannot select {k} from {pool.size} candidates")
    rng = np.random.default_rng(seed)
    return rng.choice(pool, size=k, replace=False)


def percentile_transform(values) -> np.ndarray:
    """Empirical percentile of each value within the array, in (0, 1];
    the largest value maps to 1. Ties resolve by position (stable sort)."""
    x = np.asarray(values, dtype=np.float64)
    desc_rank = np.argsort(np.argsort(-x, kind="stable"), kind="stable")
    return 1.0 - desc_rank / x.size


def age_density_scores(
    embeddings: np.ndarray, ids, num_classes: int, kmeans_seed: int
) -> ScoreVector:
    """Inverse distance to the nearest of C K-Means centers fitted on all
    candidate embeddings: 1 / (1 + ||e_v - center||)."""
    emb = np.asarray(embeddings, dtype=np.float64)
    cfg = DiversityConfig(kmeans_seed=kmeans_seed)
    centers, _ = kmeans_fit(emb, num_classes, cfg)
    dist = np.sqrt(
        ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    ).min(axis=1)
    return ScoreVector(node_ids=np.asarray(ids, dtype=np.int64), values=1.0 / (1.0 + dist))


def age_select(
    entropy: ScoreVector,
    density: ScoreVector,
    centrality: ScoreVector,
    t: int,
    k: int,
    seed: int,
    gamma_override: float | None = None,
    return_shares: bool = False,
) -> np.ndarray:
    """Time-sensitive mixture of entropy, density and centrality percentiles.

    At iteration t the centrality share is drawn once as gamma ~
    Beta(1, n_t) with n_t = 1.05 - 0.95**t (inverse CDF: 1 - u**(1/n));
    the remainder splits evenly over entropy and density. Top-k by the
    combined percentile score, ties toward the smaller node id.
    ``gamma_override`` replaces the draw (testing hook); with
    ``return_shares`` the result is (ids, (alpha, beta, gamma)).
    """
    if t < 1:
        raise UsageError("iteration index t must be >= 1")
    ids = entropy.node_ids
    if not (
        np.array_equal(np.sort(ids), np.sort(density.node_ids))
        and np.array_equal(np.sort(ids), np.sort(centrality.node_ids))
    ):
        raise UsageError("the three score vectors must cover the same candidates")
    if k > ids.size:
        raise UsageError(f"cannot select {k} from {ids.size} candidates")

    order_ids = np.sort(ids)
    ent = entropy.lookup(order_ids)
    den = density.lookup(order_ids)
    cen = centrality.lookup(order_ids)

    n_t = 1.05 - 0.95**t
    if gamma_override is None:
        u = float(np.random.default_rng(seed).random())
        gamma = 1.0 - u ** (1.0 / n_t)
    else:
        gamma = float(gamma_override)
    alpha = beta = (1.0 - gamma) / 2.0

    combined = (
        alpha * percentile_transform(ent)
        + beta * percentile_transform(den)
        + gamma * percentile_transform(cen)
    )
    pick = np.lexsort((order_ids, -combined))[:k]
    chosen = order_ids[pick].copy()
    if return_shares:
        return chosen, (alpha, beta, gamma)
    return chosen
