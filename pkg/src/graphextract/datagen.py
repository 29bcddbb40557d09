"""Synthetic dataset generation: stochastic block model graphs with
Gaussian class-separated features, and pool/train/test partitioning."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import FeatureMatrix, LabelVector, SparseGraph, build_csr
from .rng import substream

__all__ = ["SbmConfig", "NodePartition", "generate_sbm", "split_partition"]


@dataclass(frozen=True)
class SbmConfig:
    """Stochastic block model with one block per class.

    Nodes are assigned to ``num_classes`` contiguous blocks of near-equal
    size (remainder spread round-robin over the first blocks). Each
    unordered node pair becomes an edge with probability ``intra_p`` when
    the endpoints share a block and ``inter_p`` otherwise. Features are
    drawn per node from a Gaussian centered on the node's class mean; the
    class-c mean is ``feature_separation`` along coordinate axis c mod
    feature_dim, so separability is one tunable knob.
    """

    num_nodes: int
    num_classes: int
    intra_p: float
    inter_p: float
    feature_dim: int
    feature_separation: float
    noise_sigma: float

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ConfigError("num_nodes must be >= 1")
        if not 1 <= self.num_classes <= self.num_nodes:
            raise ConfigError("num_classes must be in [1, num_nodes]")
        if not (0.0 <= self.inter_p < self.intra_p <= 1.0):
            raise ConfigError(
                f"need 0 <= inter_p < intra_p <= 1, got "
                f"inter_p={self.inter_p}, intra_p={self.intra_p}"
            )
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.feature_separation < 0.0:
            raise ConfigError("feature_separation must be >= 0")
        if self.noise_sigma <= 0.0:
            raise ConfigError("noise_sigma must be > 0")


@dataclass(frozen=True)
class NodePartition:
    """Disjoint node-id sets: the attacker's candidate pool, the target
    model's training set, and the held-out test set."""

    candidate_pool: np.ndarray
    target_train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("candidate_pool", "target_train", "test"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            object.__setattr__(self, name, arr)
        if self.candidate_pool.size == 0:
            raise ConfigError("candidate_pool must be non-empty")


def _block_sizes(num_nodes: int, num_classes: int) -> np.ndarray:
    sizes = np.full(num_classes, num_nodes // num_classes, dtype=np.int64)
    sizes[: num_nodes % num_classes] += 1
    return sizes


def generate_sbm(cfg: SbmConfig, seed: int):
    """Sample (graph, features, labels) from the block model.

    Deterministic for a given (cfg, seed): graph edges and features come
    from fixed named substreams of the root seed.
    """
    n, c = cfg.num_nodes, cfg.num_classes
    labels = np.repeat(np.arange(c, dtype=np.int64), _block_sizes(n, c))

    rng = substream(seed, "data")
    # Upper-triangle Bernoulli draw for every unordered pair; desk-scale
    # node counts keep the O(N^2) matrix cheap and the code obvious.
    p = np.where(labels[:, None] == labels[None, :], cfg.intra_p, cfg.inter_p)
    draw = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    hit = draw[iu, ju] < p[iu, ju]
    edges = np.stack([iu[hit], ju[hit]], axis=1)
    graph = build_csr(edges, n, undirected=True)

    means = np.zeros((c, cfg.feature_dim))
    means[np.arange(c), np.arange(c) % cfg.feature_dim] = cfg.feature_separation
    feats = means[labels] + cfg.noise_sigma * rng.standard_normal((n, cfg.feature_dim))

    return (
        graph,
        FeatureMatrix(n, cfg.feature_dim, feats),
        LabelVector(n, c, labels),
    )


def split_partition(
    num_nodes: int,
    pool_fraction: float,
    train_fraction: float,
    seed: int,
    allow_overlap: bool = False,
) -> NodePartition:
    """Draw the candidate pool, then split the rest into train/test.

    Sizes: |pool| = floor(pool_fraction * N); |train| = floor(
    train_fraction * remaining); test gets the remainder. With
    ``allow_overlap`` the pool is drawn from all nodes and train/test from
    all nodes independently of it (pool may intersect them).

    Raises
    ------
    ConfigError
        If a fraction is outside (0, 1) or any resulting set is empty.
    """
    if not 0.0 < pool_fraction < 1.0:
        raise ConfigError(f"pool_fraction must be in (0, 1), got {pool_fraction}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")

    rng = substream(seed, "partition")
    perm = rng.permutation(num_nodes)
    n_pool = int(pool_fraction * num_nodes)
    if n_pool == 0:
        raise ConfigError("pool_fraction yields an empty candidate pool")
    pool = perm[:n_pool]

    if allow_overlap:
        rest = rng.permutation(num_nodes)
    else:
        rest = perm[n_pool:]
    n_train = int(train_fraction * rest.size)
    if n_train == 0 or n_train == rest.size:
        raise ConfigError("train_fraction yields an empty train or test set")
    return NodePartition(
        candidate_pool=pool, target_train=rest[:n_train], test=rest[n_train:]
    )
