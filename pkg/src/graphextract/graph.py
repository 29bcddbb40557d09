"""Sparse graph representation and the symmetric normalization operator.

Graphs are stored in CSR form (row offsets + column indices, no edge
weights). All structures are frozen after construction; the backing numpy
arrays are marked read-only so they can be shared across workers.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import StructuralError

__all__ = [
    "SparseGraph",
    "FeatureMatrix",
    "LabelVector",
    "build_csr",
    "audit_csr",
    "normalized_adjacency",
    "induced_subgraph",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SparseGraph:
    """CSR adjacency. ``row_offsets`` has length ``num_nodes + 1``;
    ``col_indices[row_offsets[u]:row_offsets[u+1]]`` are u's out-neighbors,
    sorted and duplicate-free. If ``undirected``, both directions of every
    edge are stored."""

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    undirected: bool

    @property
    def num_edges(self) -> int:
        """Number of stored (directed) adjacency entries."""
        return int(self.col_indices.shape[0])

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u] : self.row_offsets[u + 1]]

    def to_scipy(self) -> sp.csr_matrix:
        """Binary adjacency as a scipy CSR matrix."""
        data = np.ones(self.num_edges, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.col_indices.copy(), self.row_offsets.copy()),
            shape=(self.num_nodes, self.num_nodes),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense node attributes, one row per node."""

    num_nodes: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.num_nodes, self.dim):
            raise StructuralError(
                f"feature matrix shape {v.shape} != ({self.num_nodes}, {self.dim})"
            )
        if self.dim < 1:
            raise StructuralError("feature dim must be >= 1")
        if not np.all(np.isfinite(v)):
            raise StructuralError("feature matrix contains non-finite entries")
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth class index per node, each in [0, num_classes)."""

    num_nodes: int
    num_classes: int
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.shape != (self.num_nodes,):
            raise StructuralError(f"label vector length {lab.shape} != {self.num_nodes}")
        if self.num_classes < 1:
            raise StructuralError("num_classes must be >= 1")
        if lab.size and (lab.min() < 0 or lab.max() >= self.num_classes):
            raise StructuralError(
                f"labels must lie in [0, {self.num_classes}); "
                f"found range [{lab.min()}, {lab.max()}]"
            )
        object.__setattr__(self, "labels", _readonly(lab))


def build_csr(edge_list, num_nodes: int, undirected: bool) -> SparseGraph:
    """Build a deduplicated, column-sorted CSR graph from an edge list.

    For undirected graphs both directions of every edge are materialized.
    Duplicate input edges collapse to one entry; self-loops are kept once.

    Raises
    ------
    StructuralError
        If any endpoint falls outside [0, num_nodes).
    """
    if num_nodes < 0:
        raise StructuralError("num_nodes must be non-negative")
    edges = np.asarray(list(edge_list), dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        bad = edges[(edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1)][0]
        raise StructuralError(
            f"edge ({bad[0]}, {bad[1]}) out of range for {num_nodes} nodes"
        )
    if undirected and edges.size:
        edges = np.vstack([edges, edges[:, ::-1]])

    if edges.size:
        # Dedupe via a scalar key; num_nodes is desk-scale so u*N+v fits int64.
        keys = np.unique(edges[:, 0] * np.int64(num_nodes) + edges[:, 1])
        rows = keys // num_nodes
        cols = keys % num_nodes
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)

    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    g = SparseGraph(
        num_nodes=num_nodes,
        row_offsets=_readonly(offsets),
        col_indices=_readonly(cols),
        undirected=undirected,
    )
    audit_csr(g)
    return g


def audit_csr(g: SparseGraph) -> None:
    """Check every structural invariant of a SparseGraph; raise on failure."""
    off, col = g.row_offsets, g.col_indices
    if off.shape != (g.num_nodes + 1,):
        raise StructuralError("row_offsets has wrong length")
    if off[0] != 0 or np.any(np.diff(off) < 0):
        raise StructuralError("row_offsets must start at 0 and be non-decreasing")
    if off[-1] != col.shape[0]:
        raise StructuralError("last row offset must equal len(col_indices)")
    if col.size and (col.min() < 0 or col.max() >= g.num_nodes):
        raise StructuralError("column index out of range")
    for u in range(g.num_nodes):
        nbrs = col[off[u] : off[u + 1]]
        if nbrs.size > 1 and np.any(np.diff(nbrs) <= 0):
            raise StructuralError(f"row {u} has unsorted or duplicate columns")
    if g.undirected:
        a = g.to_scipy()
        if (a != a.T).nnz != 0:
            raise StructuralError("undirected graph has asymmetric adjacency")


def normalized_adjacency(g: SparseGraph) -> sp.csr_matrix:
    """Symmetrically normalized adjacency with self-loops.

    Returns S with S[i, j] = (A + I)[i, j] / sqrt(deg_i * deg_j), where deg
    is the row sum of A + I. The self-loop is added exactly once even if
    the input graph already contains one; an isolated node therefore gets
    deg = 1 and S[i, i] = 1.
    """
    a_hat = g.to_scipy().tolil()
    a_hat.setdiag(1.0)
    a_hat = a_hat.tocsr()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return (d @ a_hat @ d).tocsr()


def induced_subgraph(g: SparseGraph, nodes) -> tuple[SparseGraph, np.ndarray]:
    """Subgraph on ``nodes``, relabeled 0..k-1 in ascending original id.

    Returns the subgraph and the sorted original-id array; position i of
    that array is the original id of subgraph node i.
    """
    keep = np.unique(np.asarray(nodes, dtype=np.int64))
    if keep.size and (keep[0] < 0 or keep[-1] >= g.num_nodes):
        raise StructuralError("subgraph node id out of range")
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[keep] = np.arange(keep.size)

    edges = []
    for new_u, old_u in enumerate(keep):
        nbrs = g.neighbors(int(old_u))
        kept = local[nbrs]
        for v in kept[kept >= 0]:
            edges.append((new_u, int(v)))
    sub = build_csr(edges, int(keep.size), undirected=g.undirected)
    return sub, keep
