"""Node-scoring criteria for query selection.

Three signals are produced per candidate node:

- representativeness: PageRank on the pool graph (power iteration),
- uncertainty: softmax entropy, or a label-stability count under
  Gaussian feature perturbation,
- diversity: inverse distance to K-Means centroids of already-queried
  embeddings, blended with inverse cluster size.

Plus the K-Means and min-max scaling utilities those scorers need.
"""

import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, UsageError
from .gcn import GcnParams, forward
from .graph import FeatureMatrix, SparseGraph, normalized_adjacency
from .rng import substream

__all__ = [
    "PageRankConfig",
    "PerturbationConfig",
    "DiversityConfig",
    "ScoreVector",
    "pagerank",
    "entropy_scores",
    "perturbation_scores",
    "kmeans_fit",
    "diversity_scores",
    "minmax_scale",
    "save_scores",
    "load_scores",
]


@dataclass(frozen=True)
class PageRankConfig:
    damping: float = 0.85
    tol: float = 1e-10
    max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise UsageError("damping must be in (0, 1)")
        if self.tol <= 0.0 or self.max_iter < 1:
            raise UsageError("tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise UsageError("epsilon must be > 0")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")


@dataclass(frozen=True)
class DiversityConfig:
    rho: float = 0.8
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    kmeans_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise UsageError("rho must be in [0, 1]")
        if self.kmeans_tol <= 0.0 or self.kmeans_max_iter < 1:
            raise UsageError("kmeans_tol must be > 0 and kmeans_max_iter >= 1")


@dataclass(frozen=True)
class ScoreVector:
    """Parallel arrays of node ids and their scores."""

    node_ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.node_ids, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ids.shape != vals.shape or ids.ndim != 1:
            raise UsageError("node_ids and values must be parallel 1-d arrays")
        if np.unique(ids).size != ids.size:
            raise UsageError("node_ids must be unique")
        if not np.all(np.isfinite(vals)):
            raise UsageError("scores must be finite")
        object.__setattr__(self, "node_ids", ids)
        object.__setattr__(self, "values", vals)

    def lookup(self, ids) -> np.ndarray:
        """Values for the given ids (must all be present)."""
        order = np.argsort(self.node_ids)
        pos = np.searchsorted(self.node_ids, ids, sorter=order)
        take = order[pos]
        if not np.array_equal(self.node_ids[take], ids):
            raise UsageError("lookup id missing from score vector")
        return self.values[take]


def pagerank(g: SparseGraph, cfg: PageRankConfig = PageRankConfig()) -> ScoreVector:
    """Damped PageRank over all nodes of ``g`` by power iteration.

    Starts from the uniform vector; mass of dangling (out-degree-0) nodes
    is spread uniformly; stops when the L1 change drops to cfg.tol.

    Raises
    ------
    NumericalError
        If the iteration has not converged after max_iter sweeps.
    """
    n = g.num_nodes
    if n < 1:
        raise UsageError("graph must have at least one node")
    a = g.to_scipy()
    deg = np.asarray(a.sum(axis=1)).ravel()
    dangling = deg == 0.0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.maximum(deg, 1.0))
    at = a.T.tocsr()
    xi = cfg.damping

    pr = np.full(n, 1.0 / n)
    for _ in range(cfg.max_iter):
        spread = pr * inv_deg
        nxt = (1.0 - xi) / n + xi * (at @ spread + pr[dangling].sum() / n)
        residual = float(np.abs(nxt - pr).sum())
        pr = nxt
        if residual <= cfg.tol:
            return ScoreVector(node_ids=np.arange(n), values=pr)
    raise NumericalError(
        f"power iteration did not converge in {cfg.max_iter} sweeps "
        f"(residual {residual:.3e} > tol {cfg.tol:.3e})"
    )


def entropy_scores(softmax: np.ndarray, candidates) -> ScoreVector:
    """Shannon entropy (natural log) of each candidate's softmax row."""
    ids = np.unique(np.asarray(list(candidates), dtype=np.int64))
    p = np.asarray(softmax)[ids]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return ScoreVector(node_ids=ids, values=-terms.sum(axis=1))


def perturbation_scores(
    params: GcnParams,
    g: SparseGraph,
    x: FeatureMatrix,
    candidates,
    cfg: PerturbationConfig,
    noise_fn=None,
) -> ScoreVector:
    """Label-stability counts under Gaussian feature noise.

    For each of ``cfg.trials`` trials one noise matrix (std cfg.epsilon,
    shared by every node) is added to all features; a candidate scores +1
    when its argmax label survives the trial. Scores lie in [0, trials];
    a LOW count marks an unstable, uncertain node. ``noise_fn(rng, shape)``
    overrides the standard-normal draw (the zero hook recovers score =
    trials for everyone).
    """
    ids = np.unique(np.asarray(list(candidates), dtype=np.int64))
    s = normalized_adjacency(g)
    base = np.argmax(forward(params, s, x).softmax[ids], axis=1)

    counts = np.zeros(ids.size)
    for trial in range(cfg.trials):
        rng = substream(cfg.seed, "perturb", trial)
        if noise_fn is None:
            noise = rng.standard_normal(x.values.shape)
        else:
            noise = noise_fn(rng, x.values.shape)
        shaken = FeatureMatrix(x.num_nodes, x.dim, x.values + cfg.epsilon * noise)
        lab = np.argmax(forward(params, s, shaken).softmax[ids], axis=1)
        counts += lab == base
    return ScoreVector(node_ids=ids, values=counts)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("mkh,mkh->mk", diff, diff)


def kmeans_fit(points: np.ndarray, k: int, cfg: DiversityConfig, inertia_history=None):
    """Lloyd's algorithm with k-means++ seeding.

    Returns (centroids, assignments). Empty clusters are reseeded to the
    point currently farthest from its centroid. With fewer points than k
    the result is degenerate (warned): each point is its own centroid and
    surplus centroids repeat existing points. ``inertia_history``, if a
    list, receives the inertia after each assignment step.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1 or k < 1:
        raise UsageError("need a non-empty 2-d point matrix and k >= 1")
    m = pts.shape[0]
    rng = np.random.default_rng(cfg.kmeans_seed)

    if m < k:
        warnings.warn(
            f"k-means degenerate: {m} points for k={k}; centroids repeat points",
            RuntimeWarning,
        )
        centroids = pts[np.arange(k) % m].copy()
        return centroids, np.arange(m, dtype=np.int64)

    # k-means++ seeding
    centroids = np.empty((k, pts.shape[1]))
    first = int(rng.integers(m))
    centroids[0] = pts[first]
    for j in range(1, k):
        d2 = _sq_dists(pts, centroids[:j]).min(axis=1)
        total = d2.sum()
        if total <= 0.0:
            pick = int(rng.integers(m))
        else:
            pick = int(rng.choice(m, p=d2 / total))
        centroids[j] = pts[pick]

    assign = np.zeros(m, dtype=np.int64)
    for _ in range(cfg.kmeans_max_iter):
        d2 = _sq_dists(pts, centroids)
        assign = d2.argmin(axis=1)
        if inertia_history is not None:
            inertia_history.append(float(d2[np.arange(m), assign].sum()))

        for j in range(k):
            if not np.any(assign == j):
                worst = int(d2[np.arange(m), assign].argmax())
                centroids[j] = pts[worst]
                assign[worst] = j
                d2 = _sq_dists(pts, centroids)

        moved = 0.0
        for j in range(k):
            members = pts[assign == j]
            new_c = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_c - centroids[j])))
            centroids[j] = new_c
        if moved <= cfg.kmeans_tol:
            break
    return centroids, assign


def diversity_scores(
    candidate_embeddings: np.ndarray,
    candidate_ids,
    centroids: np.ndarray,
    queried_assignments: np.ndarray,
    rho: float,
) -> ScoreVector:
    """Blend of centroid distance and cluster occupancy.

    For candidate v: delta = L2 distance to the nearest centroid (ties to
    the smaller index) and q = number of queried nodes in that centroid's
    cluster. Both 1/(1+delta) and 1/(1+q) are min-max scaled over the
    candidate set, then combined rho * scaled_dist + (1-rho) * scaled_occ.
    NOTE the inversion: a candidate far from every centroid gets a small
    first term — the combined score favors candidates near sparse, small
    clusters of what was already queried.
    """
    emb = np.asarray(candidate_embeddings, dtype=np.float64)
    ids = np.asarray(candidate_ids, dtype=np.int64)
    if emb.shape[0] == 0:
        raise UsageError("diversity_scores needs at least one candidate")
    if emb.shape[0] != ids.shape[0]:
        raise UsageError("embeddings and ids must be parallel")

    d2 = _sq_dists(emb, np.asarray(centroids, dtype=np.float64))
    nearest = d2.argmin(axis=1)
    delta = np.sqrt(d2[np.arange(emb.shape[0]), nearest])
    cluster_sizes = np.bincount(
        np.asarray(queried_assignments, dtype=np.int64), minlength=centroids.shape[0]
    )
    occupancy = cluster_sizes[nearest]

    term_dist = minmax_scale(1.0 / (1.0 + delta))
    term_occ = minmax_scale(1.0 / (1.0 + occupancy))
    return ScoreVector(node_ids=ids, values=rho * term_dist + (1.0 - rho) * term_occ)


def minmax_scale(values) -> np.ndarray:
    """(x - min) / (max - min); a constant array maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise UsageError("minmax_scale needs a non-empty array")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def save_scores(path: str, scores: ScoreVector) -> None:
    """Dump as ``node_id,score`` lines under a header."""
    lines = ["node_id,score"]
    for nid, val in zip(scores.node_ids, scores.values):
        lines.append("%d,%.9g" % (nid, val))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_scores(path: str) -> ScoreVector:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    ids, vals = [], []
    for ln in lines[1:]:
        a, b = ln.split(",")
        ids.append(int(a))
        vals.append(float(b))
    return ScoreVector(node_ids=np.array(ids, dtype=np.int64), values=np.array(vals))
