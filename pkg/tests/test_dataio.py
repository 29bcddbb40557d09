"""Round-trip and error-reporting tests for the dataset text format."""

import os

import numpy as np
import pytest

from graphextract.dataio import load_dataset, save_dataset
from graphextract.datagen import SbmConfig, generate_sbm
from graphextract.errors import DatasetFormatError


@pytest.fixture
def dataset():
    cfg = SbmConfig(
        num_nodes=30,
        num_classes=3,
        intra_p=0.3,
        inter_p=0.05,
        feature_dim=5,
        feature_separation=1.5,
        noise_sigma=0.7,
    )
    return generate_sbm(cfg, seed=11)


def test_round_trip_identity(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    g2, f2, l2 = load_dataset(str(tmp_path))
    assert g2.num_nodes == g.num_nodes and g2.undirected == g.undirected
    np.testing.assert_array_equal(g2.row_offsets, g.row_offsets)
    np.testing.assert_array_equal(g2.col_indices, g.col_indices)
    np.testing.assert_array_equal(f2.values, f.values)  # exact, 17 sig digits
    np.testing.assert_array_equal(l2.labels, lab.labels)
    assert l2.num_classes == lab.num_classes


def test_save_writes_canonical_undirected_edges(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    with open(tmp_path / "graph.tsv") as fh:
        lines = fh.read().splitlines()[1:]
    pairs = [tuple(map(int, ln.split("\t"))) for ln in lines if ln]
    assert all(u <= v for u, v in pairs)
    assert len(pairs) == len(set(pairs))


def test_label_out_of_declared_range_rejected(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    lpath = tmp_path / "labels.csv"
    lines = lpath.read_text().splitlines()
    lines[3] = "7"  # header says classes=3
    lpath.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(str(tmp_path))
    assert "labels.csv" in str(exc.value)
    assert ":4:" in str(exc.value)


def test_feature_row_count_mismatch_rejected(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    fpath = tmp_path / "features.csv"
    lines = fpath.read_text().splitlines()
    fpath.write_text("\n".join(lines[:-1]) + "\n")  # drop last row
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(str(tmp_path))
    assert "features.csv" in str(exc.value)


def test_malformed_edge_line_names_location(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    gpath = tmp_path / "graph.tsv"
    lines = gpath.read_text().splitlines()
    lines[1] = "0 1"  # space, not tab
    gpath.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(str(tmp_path))
    assert "graph.tsv:2:" in str(exc.value)


def test_missing_header_rejected(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    gpath = tmp_path / "graph.tsv"
    body = gpath.read_text().splitlines()[1:]
    gpath.write_text("\n".join(body) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(str(tmp_path))


def test_no_stray_temp_files(tmp_path, dataset):
    g, f, lab = dataset
    save_dataset(str(tmp_path), g, f, lab)
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]
