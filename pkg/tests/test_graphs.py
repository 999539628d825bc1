"""Tests for graph containers, k-hop adjacencies, homophily statistics,
class-connection matrices, the SBM generator, and split generation."""

import numpy as np
import pytest

from heg.graphs import (Graph, KHopSet, Split, build_khop, d_hete,
                        generate_splits, heterophily_matrix, khop_adjacency,
                        node_homophily, onehot, row_norm, sbm_generate,
                        sym_norm)
from heg.sparse import SparseMatrix


def undirected(n, pairs, loops=()):
    rows, cols = [], []
    for a, b in pairs:
        rows += [a, b]
        cols += [b, a]
    for a in loops:
        rows.append(a)
        cols.append(a)
    return SparseMatrix.from_edges(n, n, rows, cols)


# ---------------------------------------------------------------- k-hop


def test_khop1_strips_self_loops():
    adj = undirected(3, [(0, 1), (1, 2)], loops=[1])
    out = khop_adjacency(adj, 1).to_dense()
    assert np.array_equal(out, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def test_path_has_no_hop2_neighbors():
    # distance(0,2)=2 but only one length-2 walk, and the rule needs >= 2
    adj = undirected(3, [(0, 1), (1, 2)])
    assert khop_adjacency(adj, 2).nnz == 0


def test_cycle4_hop2_pairs_connected_by_two_walks():
    adj = undirected(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    out = khop_adjacency(adj, 2).to_dense()
    expect = np.zeros((4, 4))
    expect[0, 2] = expect[2, 0] = 1
    expect[1, 3] = expect[3, 1] = 1
    assert np.array_equal(out, expect)


def test_khop_diagonal_always_zero():
    adj = undirected(4, [(0, 1), (1, 2), (2, 3), (3, 0)], loops=[0, 2])
    for k in (1, 2, 3):
        assert np.all(khop_adjacency(adj, k).to_dense().diagonal() == 0)


def test_hop2_excludes_hop1_nodes():
    # triangle + pendant: 0-1-2 triangle, 3 attached to 0
    adj = undirected(4, [(0, 1), (1, 2), (2, 0), (0, 3)])
    out2 = khop_adjacency(adj, 2).to_dense()
    # 1 and 2 are distance-1 from each other -> never hop-2
    assert out2[1, 2] == 0 and out2[2, 1] == 0
    # 3's distance-2 set is {1, 2} but each via only one walk
    assert out2[3].sum() == 0


def test_build_khop_returns_indexed_set(tiny_graph):
    ks = build_khop(tiny_graph.adj, 3)
    assert isinstance(ks, KHopSet) and ks.max_hop == 3
    assert np.array_equal(ks[1].to_dense(),
                          khop_adjacency(tiny_graph.adj, 1).to_dense())
    with pytest.raises(IndexError):
        ks[4]


# ---------------------------------------------------------------- normalization


def test_sym_norm_star_oracle():
    # star center 0 with leaves 1..3: P[0,j] = 1/sqrt(3*1)
    adj = undirected(4, [(0, 1), (0, 2), (0, 3)])
    p = sym_norm(adj).to_dense()
    assert p[0, 1] == pytest.approx(1 / np.sqrt(3))
    assert p[1, 0] == pytest.approx(1 / np.sqrt(3))
    assert p[1, 2] == 0


def test_row_norm_divides_by_degree():
    adj = undirected(3, [(0, 1), (0, 2)])
    m = row_norm(adj).to_dense()
    assert np.allclose(m[0], [0, 0.5, 0.5])
    assert np.allclose(m[1], [1, 0, 0])


def test_norms_tolerate_isolated_nodes():
    adj = undirected(3, [(0, 1)])
    assert np.all(np.isfinite(sym_norm(adj).to_dense()))
    assert np.all(np.isfinite(row_norm(adj).to_dense()))
    assert row_norm(adj).to_dense()[2].sum() == 0


# ---------------------------------------------------------------- homophily


def test_node_homophily_extremes():
    y_same = np.zeros(4, dtype=int)
    y_alt = np.array([0, 1, 0, 1])
    ring = undirected(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert node_homophily(Graph("a", np.zeros((4, 1)), y_same, ring, p=1)) == 1.0
    assert node_homophily(Graph("b", np.zeros((4, 1)), y_alt, ring, p=2)) == 0.0


def test_node_homophily_averages_over_non_isolated():
    # 0-1 same class, 2-3 different class, 4 isolated (ignored)
    adj = undirected(5, [(0, 1), (2, 3)])
    y = np.array([0, 0, 0, 1, 0])
    g = Graph("c", np.zeros((5, 1)), y, adj, p=2)
    assert node_homophily(g) == pytest.approx((1 + 1 + 0 + 0) / 4)


def test_node_homophily_all_isolated_errors():
    adj = SparseMatrix.from_edges(2, 2, [], [])
    g = Graph("d", np.zeros((2, 1)), np.array([0, 1]), adj, p=2)
    with pytest.raises(ValueError):
        node_homophily(g)


def test_node_homophily_ignores_self_loops():
    adj = undirected(2, [(0, 1)], loops=[0])
    y = np.array([0, 1])
    g = Graph("e", np.zeros((2, 1)), y, adj, p=2)
    assert node_homophily(g) == 0.0


# ---------------------------------------------------------------- class matrices


def test_onehot_masks_rows():
    y = np.array([1, 0, 2])
    mask = np.array([True, False, True])
    out = onehot(y, 3, mask)
    assert np.array_equal(out, [[0, 1, 0], [0, 0, 0], [0, 0, 1]])


def test_heterophily_matrix_hand_example():
    # one edge between a class-0 and a class-1 node: H = [[0,1],[1,0]]
    adj = undirected(2, [(0, 1)])
    h = heterophily_matrix(np.array([0, 1]), 2, adj, np.ones(2, dtype=bool))
    assert np.array_equal(h.values, [[0.0, 1.0], [1.0, 0.0]])


def test_heterophily_matrix_rows_with_no_mass_stay_zero():
    adj = undirected(2, [(0, 1)])
    mask = np.array([True, True])
    h = heterophily_matrix(np.array([0, 0]), 3, adj, mask)
    # class 0 connects only to class 0; classes 1,2 unseen -> zero rows
    assert np.array_equal(h.values, [[1, 0, 0], [0, 0, 0], [0, 0, 0]])


def test_heterophily_matrix_respects_node_mask():
    adj = undirected(3, [(0, 1), (1, 2)])
    y = np.array([0, 1, 0])
    m_all = heterophily_matrix(y, 2, adj, np.ones(3, dtype=bool)).values
    m_partial = heterophily_matrix(y, 2, adj, np.array([True, True, False])).values
    assert not np.array_equal(m_all, m_partial)


def test_d_hete_zero_on_ground_truth():
    adj = undirected(4, [(0, 1), (1, 2), (2, 3)])
    y = np.array([0, 1, 0, 1])
    mask = np.ones(4, dtype=bool)
    assert d_hete(y, y, 2, adj, mask) == 0.0


def test_d_hete_positive_when_predictions_flip_connectivity():
    adj = undirected(4, [(0, 1), (2, 3)])
    y = np.array([0, 1, 0, 1])
    pred = np.array([0, 0, 1, 1])
    mask = np.ones(4, dtype=bool)
    assert d_hete(pred, y, 2, adj, mask) > 0.0


def test_d_hete_frobenius_oracle():
    adj = undirected(2, [(0, 1)])
    y = np.array([0, 1])
    pred = np.array([0, 0])
    mask = np.ones(2, dtype=bool)
    # truth H = [[0,1],[1,0]]; prediction H = [[1,0],[0,0]]
    assert d_hete(pred, y, 2, adj, mask) == pytest.approx(1 + 1 + 1 + 0)


# ---------------------------------------------------------------- SBM + splits


def test_sbm_is_deterministic_and_respects_sizes():
    mixing = np.array([[0.3, 0.1], [0.1, 0.3]])
    means = np.array([[1.0, 0.0], [0.0, 1.0]])
    g1 = sbm_generate([10, 15], mixing, means, 0.5, seed=4)
    g2 = sbm_generate([10, 15], mixing, means, 0.5, seed=4)
    assert g1.n == 25 and g1.p == 2 and g1.d0 == 2
    assert np.array_equal(g1.x, g2.x)
    assert np.array_equal(g1.adj.to_dense(), g2.adj.to_dense())
    assert np.array_equal(g1.y, np.repeat([0, 1], [10, 15]))


def test_sbm_mixing_extremes_control_homophily():
    means = np.eye(2)
    intra = sbm_generate([20, 20], np.array([[0.5, 0.0], [0.0, 0.5]]),
                         means, 0.1, seed=1)
    inter = sbm_generate([20, 20], np.array([[0.0, 0.5], [0.5, 0.0]]),
                         means, 0.1, seed=1)
    assert node_homophily(intra) == 1.0
    assert node_homophily(inter) == 0.0


def test_sbm_feature_noise_scale():
    means = np.zeros((2, 50))
    g = sbm_generate([50, 50], np.full((2, 2), 0.1), means, 2.0, seed=0)
    assert abs(g.x.std() - 2.0) < 0.1


def test_generate_splits_sizes_and_disjointness(tiny_graph):
    splits = generate_splits(tiny_graph, count=4, seed=3)
    assert len(splits) == 4
    for s in splits:
        n = tiny_graph.n
        assert s.train.sum() + s.val.sum() + s.test.sum() == n
        assert not np.any(s.train & s.val)
        assert not np.any(s.train & s.test)
        assert not np.any(s.val & s.test)
    # default ratios are 48/32/20 per class: 40 nodes -> 19/13/8 or close
    s0 = splits[0]
    assert s0.train.sum() == round(0.48 * 20) * 2
    assert s0.val.sum() == round(0.32 * 20) * 2


def test_generate_splits_stratified_per_class(tiny_graph):
    s = generate_splits(tiny_graph, count=1, seed=0)[0]
    y = tiny_graph.y
    for c in (0, 1):
        assert s.train[y == c].sum() == round(0.48 * 20)


def test_generate_splits_deterministic(tiny_graph):
    a = generate_splits(tiny_graph, count=2, seed=9)
    b = generate_splits(tiny_graph, count=2, seed=9)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.train, sb.train)
        assert np.array_equal(sa.val, sb.val)
        assert np.array_equal(sa.test, sb.test)


def test_generate_splits_rejects_tiny_classes():
    adj = undirected(4, [(0, 1), (2, 3)])
    g = Graph("t", np.zeros((4, 1)), np.array([0, 0, 0, 1]), adj, p=2)
    with pytest.raises(ValueError):
        generate_splits(g, count=1, seed=0)


def test_split_overlap_detected():
    m = np.array([True, False])
    with pytest.raises(ValueError, match="overlap"):
        Split(train=m, val=m, test=np.array([False, True]))


def test_graph_validates_adjacency_symmetry():
    asym = SparseMatrix.from_edges(2, 2, [0], [1])
    with pytest.raises(ValueError):
        Graph("g", np.zeros((2, 1)), np.array([0, 1]), asym, p=2)


def test_graph_validates_label_range():
    adj = undirected(2, [(0, 1)])
    with pytest.raises(ValueError):
        Graph("g", np.zeros((2, 1)), np.array([0, 5]), adj, p=2)


def test_num_undirected_edges_counts_pairs_and_loops():
    adj = undirected(3, [(0, 1), (1, 2)], loops=[2])
    g = Graph("g", np.zeros((3, 1)), np.zeros(3, dtype=int), adj, p=1)
    assert g.num_undirected_edges() == 3
