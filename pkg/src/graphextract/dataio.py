"""Line-oriented text serialization for datasets.

A dataset directory holds three files:

- ``graph.tsv``    header ``#nodes=<N> undirected=<0|1>``, then one
                   ``u<TAB>v`` edge per line (0-based; for undirected
                   graphs each edge appears once with u <= v)
- ``features.csv`` header ``#dim=<d>``, then N comma-separated rows
- ``labels.csv``   header ``#classes=<C>``, then N integer lines

Floats are written with 17 significant digits so save -> load is an exact
round trip for float64.
"""

import os

import numpy as np

from .errors import DatasetFormatError
from .graph import FeatureMatrix, LabelVector, SparseGraph, build_csr

__all__ = ["save_dataset", "load_dataset"]

GRAPH_FILE = "graph.tsv"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_dataset(
    path: str, graph: SparseGraph, features: FeatureMatrix, labels: LabelVector
) -> None:
    """Write the three dataset files into directory ``path``."""
    os.makedirs(path, exist_ok=True)

    lines = [f"#nodes={graph.num_nodes} undirected={int(graph.undirected)}"]
    for u in range(graph.num_nodes):
        for v in graph.neighbors(u):
            if graph.undirected and v < u:
                continue  # canonical u <= v form, emitted once
            lines.append(f"{u}\t{v}")
    _atomic_write(os.path.join(path, GRAPH_FILE), "\n".join(lines) + "\n")

    rows = [f"#dim={features.dim}"]
    for row in features.values:
        rows.append(",".join("%.17g" % x for x in row))
    _atomic_write(os.path.join(path, FEATURES_FILE), "\n".join(rows) + "\n")

    lab = [f"#classes={labels.num_classes}"]
    lab.extend(str(int(x)) for x in labels.labels)
    _atomic_write(os.path.join(path, LABELS_FILE), "\n".join(lab) + "\n")


def _header_fields(line: str, filename: str, expected: list[str]) -> dict[str, str]:
    if not line.startswith("#"):
        raise DatasetFormatError(filename, 1, "missing header line")
    out = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise DatasetFormatError(filename, 1, f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    for key in expected:
        if key not in out:
            raise DatasetFormatError(filename, 1, f"header missing {key}=")
    return out


def load_dataset(path: str):
    """Read a dataset directory; returns (graph, features, labels).

    Raises
    ------
    DatasetFormatError
        Naming the offending file and line for malformed content or
        cross-file inconsistencies (node-count mismatch, label >= C).
    """
    gpath = os.path.join(path, GRAPH_FILE)
    with open(gpath, encoding="utf-8") as fh:
        glines = fh.read().splitlines()
    if not glines:
        raise DatasetFormatError(GRAPH_FILE, 1, "empty file")
    hdr = _header_fields(glines[0], GRAPH_FILE, ["nodes", "undirected"])
    try:
        num_nodes = int(hdr["nodes"])
        undirected = bool(int(hdr["undirected"]))
    except ValueError as exc:
        raise DatasetFormatError(GRAPH_FILE, 1, f"bad header value: {exc}") from exc
    edges = []
    for i, line in enumerate(glines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetFormatError(GRAPH_FILE, i, f"expected 'u<TAB>v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetFormatError(GRAPH_FILE, i, f"non-integer endpoint in {line!r}")
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise DatasetFormatError(
                GRAPH_FILE, i, f"edge ({u}, {v}) out of range for {num_nodes} nodes"
            )
        edges.append((u, v))
    graph = build_csr(edges, num_nodes, undirected)

    fpath = os.path.join(path, FEATURES_FILE)
    with open(fpath, encoding="utf-8") as fh:
        flines = fh.read().splitlines()
    if not flines:
        raise DatasetFormatError(FEATURES_FILE, 1, "empty file")
    fhdr = _header_fields(flines[0], FEATURES_FILE, ["dim"])
    try:
        dim = int(fhdr["dim"])
    except ValueError as exc:
        raise DatasetFormatError(FEATURES_FILE, 1, f"bad header value: {exc}") from exc
    body = [ln for ln in flines[1:] if ln.strip()]
    if len(body) != num_nodes:
        raise DatasetFormatError(
            FEATURES_FILE,
            len(flines),
            f"{len(body)} feature rows but graph declares {num_nodes} nodes",
        )
    values = np.empty((num_nodes, dim))
    for i, line in enumerate(body):
        parts = line.split(",")
        if len(parts) != dim:
            raise DatasetFormatError(
                FEATURES_FILE, i + 2, f"expected {dim} values, got {len(parts)}"
            )
        try:
            values[i] = [float(p) for p in parts]
        except ValueError:
            raise DatasetFormatError(FEATURES_FILE, i + 2, f"non-numeric value in {line!r}")
    features = FeatureMatrix(num_nodes, dim, values)

    lpath = os.path.join(path, LABELS_FILE)
    with open(lpath, encoding="utf-8") as fh:
        llines = fh.read().splitlines()
    if not llines:
        raise DatasetFormatError(LABELS_FILE, 1, "empty file")
    lhdr = _header_fields(llines[0], LABELS_FILE, ["classes"])
    try:
        num_classes = int(lhdr["classes"])
    except ValueError as exc:
        raise DatasetFormatError(LABELS_FILE, 1, f"bad header value: {exc}") from exc
    lbody = [ln for ln in llines[1:] if ln.strip()]
    if len(lbody) != num_nodes:
        raise DatasetFormatError(
            LABELS_FILE,
            len(llines),
            f"{len(lbody)} labels but graph declares {num_nodes} nodes",
        )
    lab = np.empty(num_nodes, dtype=np.int64)
    for i, line in enumerate(lbody):
        try:
            lab[i] = int(line)
        except ValueError:
            raise DatasetFormatError(LABELS_FILE, i + 2, f"non-integer label {line!r}")
        if not 0 <= lab[i] < num_classes:
            raise DatasetFormatError(
                LABELS_FILE,
                i + 2,
                f"label {lab[i]} outside [0, {num_classes})",
            )
    labels = LabelVector(num_nodes, num_classes, lab)

    return graph, features, labels
