"""Two-layer graph convolutional classifier, from scratch on numpy.

Architecture: hidden = ReLU(S X W1) with S the symmetric-normalized
adjacency, then logits = hidden W2 + b2 and a max-stabilized softmax.
The first layer carries no bias. Training is full-batch adaptive-moment
gradient descent on masked cross-entropy, with analytic gradients.
"""

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import StructuralError, TrainingDivergedError, UsageError
from .graph import FeatureMatrix, LabelVector, SparseGraph, normalized_adjacency
from .rng import substream

__all__ = [
    "GcnParams",
    "TrainConfig",
    "ForwardCache",
    "init_params",
    "forward",
    "cross_entropy_loss",
    "loss_and_gradients",
    "train",
    "predict_embed",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class GcnParams:
    """Weights of the two-layer model: w1 (d x h), w2 (h x C), b2 (C)."""

    w1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    hidden_dim: int

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        if w1.ndim != 2 or w2.ndim != 2 or b2.ndim != 1:
            raise StructuralError("w1/w2 must be matrices and b2 a vector")
        if w1.shape[1] != self.hidden_dim or w2.shape[0] != self.hidden_dim:
            raise StructuralError(
                f"hidden dim mismatch: w1 {w1.shape}, w2 {w2.shape}, h={self.hidden_dim}"
            )
        if w2.shape[1] != b2.shape[0]:
            raise StructuralError(f"w2 {w2.shape} incompatible with b2 {b2.shape}")
        for name, a in (("w1", w1), ("w2", w2), ("b2", b2)):
            if not np.all(np.isfinite(a)):
                raise StructuralError(f"{name} contains non-finite entries")
            a.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def input_dim(self) -> int:
        return int(self.w1.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.w2.shape[1])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 1000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise UsageError("learning_rate must be > 0")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")


@dataclass(frozen=True)
class ForwardCache:
    """Per-node activations: hidden (N x h), logits and softmax (N x C)."""

    hidden: np.ndarray
    logits: np.ndarray
    softmax: np.ndarray


def init_params(d: int, h: int, c: int, seed: int) -> GcnParams:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero bias."""
    if min(d, h, c) < 1:
        raise UsageError("d, h, c must all be >= 1")
    rng = substream(seed, "init")
    bound1 = np.sqrt(6.0 / (d + h))
    bound2 = np.sqrt(6.0 / (h + c))
    w1 = rng.uniform(-bound1, bound1, size=(d, h))
    w2 = rng.uniform(-bound2, bound2, size=(h, c))
    return GcnParams(w1=w1, w2=w2, b2=np.zeros(c), hidden_dim=h)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: GcnParams, norm_adj: sp.csr_matrix, x: FeatureMatrix) -> ForwardCache:
    """Evaluate the network on every node.

    Raises
    ------
    StructuralError
        On any dimension disagreement between operator, features and params.
    """
    if norm_adj.shape[0] != x.num_nodes:
        raise StructuralError(
            f"operator is {norm_adj.shape} but features have {x.num_nodes} rows"
        )
    if x.dim != params.input_dim:
        raise StructuralError(
            f"feature dim {x.dim} != weight input dim {params.input_dim}"
        )
    sx = norm_adj @ x.values
    hidden = np.maximum(sx @ params.w1, 0.0)
    logits = hidden @ params.w2 + params.b2
    return ForwardCache(hidden=hidden, logits=logits, softmax=_softmax_rows(logits))


def _as_mask_array(mask, num_nodes: int) -> np.ndarray:
    m = np.unique(np.asarray(list(mask) if not isinstance(mask, np.ndarray) else mask))
    if m.size == 0:
        raise UsageError("mask must be non-empty")
    m = m.astype(np.int64)
    if m[0] < 0 or m[-1] >= num_nodes:
        raise UsageError(f"mask ids must lie in [0, {num_nodes})")
    return m


def cross_entropy_loss(cache: ForwardCache, labels: LabelVector, mask) -> float:
    """Mean negative log-likelihood over the masked nodes.

    Probabilities are floored at 1e-12 before the log.
    """
    m = _as_mask_array(mask, labels.num_nodes)
    p = cache.softmax[m, labels.labels[m]]
    return float(-np.mean(np.log(np.maximum(p, 1e-12))))


def _loss_and_grads_core(w1, w2, b2, sx, y, m):
    """One forward/backward pass; returns (loss, {'w1','w2','b2'} grads)."""
    z1 = sx @ w1
    hid = np.maximum(z1, 0.0)
    logits = hid @ w2 + b2
    prob = _softmax_rows(logits)

    p_true = np.maximum(prob[m, y[m]], 1e-12)
    loss = float(-np.mean(np.log(p_true)))

    dz2 = np.zeros_like(prob)
    dz2[m] = prob[m] / m.size
    dz2[m, y[m]] -= 1.0 / m.size
    dhid = dz2 @ w2.T
    dz1 = dhid * (z1 > 0.0)
    return loss, {
        "w1": sx.T @ dz1,
        "w2": hid.T @ dz2,
        "b2": dz2.sum(axis=0),
    }


def loss_and_gradients(
    params: GcnParams,
    graph: SparseGraph,
    x: FeatureMatrix,
    labels: LabelVector,
    mask,
):
    """Masked cross-entropy loss and its analytic parameter gradients.

    Returns (loss, grads) with grads keyed 'w1', 'w2', 'b2'. The same
    backward pass drives training; exposed so gradient checks can compare
    it against finite differences.
    """
    m = _as_mask_array(mask, labels.num_nodes)
    sx = normalized_adjacency(graph) @ x.values
    return _loss_and_grads_core(
        params.w1, params.w2, params.b2, sx, labels.labels, m
    )


def train(
    graph: SparseGraph,
    x: FeatureMatrix,
    labels: LabelVector,
    mask,
    cfg: TrainConfig,
    warm_start: GcnParams | None = None,
) -> GcnParams:
    """Full-batch training on cross-entropy over ``mask``.

    From ``warm_start`` when given (optimizer moments start fresh),
    otherwise from a seeded Glorot init. Deterministic in (inputs, seed).

    Raises
    ------
    TrainingDivergedError
        If the loss becomes non-finite, reporting the epoch.
    """
    m = _as_mask_array(mask, labels.num_nodes)
    if warm_start is not None:
        if warm_start.input_dim != x.dim or warm_start.num_classes != labels.num_classes:
            raise StructuralError("warm_start shape does not match data")
        w1 = warm_start.w1.copy()
        w2 = warm_start.w2.copy()
        b2 = warm_start.b2.copy()
        h = warm_start.hidden_dim
    else:
        p0 = init_params(x.dim, 16, labels.num_classes, cfg.seed)
        w1, w2, b2, h = p0.w1.copy(), p0.w2.copy(), p0.b2.copy(), p0.hidden_dim

    # The aggregation S X never changes during training; fold it once.
    sx = normalized_adjacency(graph) @ x.values
    y = labels.labels

    moments = {k: np.zeros_like(v) for k, v in {"w1": w1, "w2": w2, "b2": b2}.items()}
    moments2 = {k: np.zeros_like(v) for k, v in moments.items()}
    b1c, b2c = 1.0, 1.0  # running beta powers for bias correction

    for epoch in range(1, cfg.epochs + 1):
        loss, grads = _loss_and_grads_core(w1, w2, b2, sx, y, m)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)

        b1c *= cfg.adam_beta1
        b2c *= cfg.adam_beta2
        params_live = {"w1": w1, "w2": w2, "b2": b2}
        for key, g in grads.items():
            moments[key] = cfg.adam_beta1 * moments[key] + (1 - cfg.adam_beta1) * g
            moments2[key] = cfg.adam_beta2 * moments2[key] + (1 - cfg.adam_beta2) * g * g
            m_hat = moments[key] / (1.0 - b1c)
            v_hat = moments2[key] / (1.0 - b2c)
            params_live[key] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)

    return GcnParams(w1=w1, w2=w2, b2=b2, hidden_dim=h)


def predict_embed(params: GcnParams, graph: SparseGraph, x: FeatureMatrix):
    """Predicted labels, softmax matrix, and hidden-layer embeddings.

    Argmax ties resolve toward the smaller class index.
    """
    cache = forward(params, normalized_adjacency(graph), x)
    labels = np.argmax(cache.softmax, axis=1).astype(np.int64)
    return labels, cache.softmax, cache.hidden


def save_params(path: str, params: GcnParams) -> None:
    """Checkpoint: header ``gcn d=<d> h=<h> c=<C>`` then row-major dumps."""
    lines = [f"gcn d={params.input_dim} h={params.hidden_dim} c={params.num_classes}"]
    for mat in (params.w1, params.w2):
        for row in mat:
            lines.append(",".join("%.17g" % v for v in row))
    lines.append(",".join("%.17g" % v for v in params.b2))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_params(path: str) -> GcnParams:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "gcn":
        raise StructuralError(f"bad checkpoint header: {lines[0]!r}")
    dims = dict(tok.split("=") for tok in head[1:])
    d, h, c = int(dims["d"]), int(dims["h"]), int(dims["c"])
    if len(lines) != 1 + d + h + 1:
        raise StructuralError(
            f"checkpoint has {len(lines) - 1} data lines, expected {d + h + 1}"
        )
    rows = [np.array([float(t) for t in ln.split(",")]) for ln in lines[1:]]
    w1 = np.vstack(rows[:d])
    w2 = np.vstack(rows[d : d + h])
    b2 = rows[d + h]
    return GcnParams(w1=w1, w2=w2, b2=b2, hidden_dim=h)
