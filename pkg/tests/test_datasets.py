"""Tests for the on-disk dataset layout: meta.json, X.csv, y.txt,
edges.txt, and splits/split_*.json."""

import json

import numpy as np
import pytest

from heg.datasets import load_dataset, save_dataset
from heg.graphs import generate_splits, sbm_generate


@pytest.fixture()
def saved(tmp_path, tiny_graph, tiny_splits):
    root = tmp_path / "ds"
    save_dataset(root, tiny_graph, tiny_splits)
    return root


def test_roundtrip_preserves_everything(saved, tiny_graph, tiny_splits):
    g, splits = load_dataset(saved)
    assert g.name == tiny_graph.name
    assert np.array_equal(g.x, tiny_graph.x)
    assert np.array_equal(g.y, tiny_graph.y)
    assert np.array_equal(g.adj.to_dense(), tiny_graph.adj.to_dense())
    assert g.p == tiny_graph.p
    assert len(splits) == len(tiny_splits)
    for a, b in zip(splits, tiny_splits):
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.val, b.val)
        assert np.array_equal(a.test, b.test)


def test_layout_files_exist(saved):
    assert (saved / "meta.json").exists()
    assert (saved / "X.csv").exists()
    assert (saved / "y.txt").exists()
    assert (saved / "edges.txt").exists()
    assert (saved / "splits" / "split_0.json").exists()


def test_edges_file_is_one_undirected_pair_per_line(saved, tiny_graph):
    lines = (saved / "edges.txt").read_text().strip().splitlines()
    assert len(lines) == tiny_graph.num_undirected_edges()
    for line in lines:
        a, b = map(int, line.split())
        assert a <= b


def test_meta_contents(saved, tiny_graph):
    meta = json.loads((saved / "meta.json").read_text())
    assert meta["n"] == tiny_graph.n
    assert meta["d0"] == tiny_graph.d0
    assert meta["p"] == tiny_graph.p
    assert meta["name"] == tiny_graph.name


def test_splits_sorted_numerically(tmp_path, tiny_graph):
    # 11 split files: split_10.json must come after split_9.json
    splits = generate_splits(tiny_graph, count=11, seed=0)
    root = tmp_path / "ds11"
    save_dataset(root, tiny_graph, splits)
    _, loaded = load_dataset(root)
    assert len(loaded) == 11
    for orig, got in zip(splits, loaded):
        assert np.array_equal(orig.train, got.train)


def test_overlapping_split_rejected(saved):
    doc = json.loads((saved / "splits" / "split_0.json").read_text())
    doc["val"] = doc["train"][:1] + doc["val"][1:]
    (saved / "splits" / "split_0.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="overlap"):
        load_dataset(saved)


def test_out_of_range_node_id_rejected(saved, tiny_graph):
    doc = json.loads((saved / "splits" / "split_0.json").read_text())
    doc["train"][0] = tiny_graph.n + 5
    (saved / "splits" / "split_0.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_dataset(saved)


def test_duplicate_ids_within_mask_rejected(saved):
    doc = json.loads((saved / "splits" / "split_0.json").read_text())
    doc["train"][1] = doc["train"][0]
    (saved / "splits" / "split_0.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_dataset(saved)


def test_missing_file_raises(saved):
    (saved / "y.txt").unlink()
    with pytest.raises(FileNotFoundError):
        load_dataset(saved)


def test_label_meta_mismatch_rejected(saved):
    meta = json.loads((saved / "meta.json").read_text())
    meta["p"] = 1  # labels contain class 1 -> inconsistent
    (saved / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(ValueError):
        load_dataset(saved)


def test_directed_edge_list_is_symmetrized(tmp_path):
    g = sbm_generate([5, 5], np.full((2, 2), 0.4), np.eye(2), 0.1, seed=2)
    root = tmp_path / "sym"
    save_dataset(root, g, generate_splits(g, count=1, seed=0))
    loaded, _ = load_dataset(root)
    assert loaded.adj.is_symmetric()
