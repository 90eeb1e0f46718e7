import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import pdist

from dpsm.config import RunConfig
from dpsm.graph import (GraphError, ParseError, PointSet, WeightedGraph, knn_graph, knn_indices,
                        load_edges, load_points, max_pairwise_distance)
from oracles import knn_weight_scalar


# -- loaders -----------------------------------------------------------------

def test_load_points_basic():
    ps = load_points("0,0\n1,0\n0,1")
    assert (ps.n, ps.d) == (3, 2)
    assert ps.labels is None


def test_load_points_label_column():
    ps = load_points("0,0,7", label_column=2)
    assert ps.points.tolist() == [[0.0, 0.0]]
    assert ps.labels.tolist() == [7]


def test_load_points_whitespace_and_comments():
    ps = load_points("# header\n1 2\n\n3\t4\n", label_column=-1)
    assert ps.points.ravel().tolist() == [1.0, 3.0]
    assert ps.labels.tolist() == [2, 4]


@pytest.mark.parametrize("text, msg", [
    ("0,x", "row 1"),
    ("0,0\n1,2,3", "row 2"),
    ("", "empty input"),
    ("# only a comment\n", "empty input"),
])
def test_load_points_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        load_points(text)


def test_load_edges_basic():
    g = load_edges("0 1 1.0")
    assert (g.n_nodes, g.n_edges) == (2, 1)
    assert g.weight(0, 1) == g.weight(1, 0) == 1.0


def test_load_edges_node_count_keeps_isolated():
    g = load_edges("0 1 0.5\n", node_count=4)
    assert g.n_nodes == 4
    assert g.degree().tolist() == [0.5, 0.5, 0.0, 0.0]


@pytest.mark.parametrize("text, kw, msg", [
    ("0 0 1.0", {}, "line 1: self-loop"),
    ("0 1 1.0\n1 0 2.0", {}, "line 2: duplicate"),
    ("0 1 0", {}, "line 1: weight"),
    ("0 1 -2", {}, "line 1: weight"),
    ("0 1 1\n0 5 1", {"node_count": 3}, "line 2: node id 5"),
    ("0 1", {}, "line 1"),
])
def test_load_edges_errors(text, kw, msg):
    with pytest.raises(GraphError, match=msg):
        load_edges(text, **kw)


def test_from_edges_rejects_bad_input():
    with pytest.raises(GraphError):
        WeightedGraph.from_edges([0], [0], [1.0], 2)
    with pytest.raises(GraphError):
        WeightedGraph.from_edges([0], [3], [1.0], 2)


def test_pointset_label_length_checked():
    with pytest.raises(ValueError):
        PointSet(np.zeros((3, 2)), np.zeros(2, dtype=int))


# -- kNN graph ---------------------------------------------------------------

def test_two_points_single_edge_of_weight_one():
    for sigma in (0.01, 0.1, 5.0):
        g = knn_graph(np.array([[0.0, 0.0], [3.0, 4.0]]), k=1, sigma_scale=sigma)
        assert g.n_edges == 1
        assert g.weight(0, 1) == pytest.approx(1.0, abs=1e-15)


def test_equilateral_triangle():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    g = knn_graph(pts, k=2, sigma_scale=0.1)
    oracle = knn_weight_scalar(pts.tolist(), 2, 0.1)
    u, v, w = g.edges()
    assert g.n_edges == 3
    for a, b, x in zip(u, v, w):
        assert x == pytest.approx(0.75, abs=1e-12)
        assert x == pytest.approx(oracle[(a, b)], abs=1e-12)


def test_defaults_follow_protocol():
    cfg = RunConfig()
    assert cfg.k_neighbors == 20
    assert cfg.sigma_scale == 0.1
    assert cfg.kernel_form == "product"


def test_k_too_large():
    with pytest.raises(ValueError):
        knn_graph(np.zeros((3, 2)) + np.arange(3)[:, None], k=3)
    with pytest.raises(ValueError):
        knn_graph(np.arange(4.0)[:, None], k=0)


def test_duplicate_points_allowed():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    g = knn_graph(pts, k=2)
    assert g.weight(0, 1) > 0


@pytest.mark.parametrize("form", ["product", "ratio"])
def test_matches_scalar_oracle(form):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(25, 3))
    g = knn_graph(pts, k=5, sigma_scale=0.3, kernel_form=form)
    oracle = knn_weight_scalar(pts.tolist(), 5, 0.3, form)
    u, v, w = g.edges()
    got = dict(zip(zip(u.tolist(), v.tolist()), w.tolist()))
    assert set(got) == set(oracle)
    for key, val in oracle.items():
        assert got[key] == pytest.approx(val, rel=1e-12, abs=1e-15)


def test_max_pairwise_distance_exact():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(300, 4))
    assert max_pairwise_distance(pts) == pytest.approx(pdist(pts).max(), rel=1e-12)


def test_tree_and_brute_agree():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(400, 2))
    pts = np.vstack([pts, pts[:10], np.repeat(pts[:1], 20, axis=0)])  # exact ties
    ib, db = knn_indices(pts, 8, "brute")
    it, dt = knn_indices(pts, 8, "tree")
    assert np.array_equal(ib, it)
    assert np.allclose(db, dt, atol=1e-12)


def test_tie_break_to_lower_index():
    # node 0 at the center of four equidistant neighbors
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    assert sorted(knn_indices(pts, 2, "brute")[0][0].tolist()) == [1, 2]


point_clouds = st.integers(3, 30).flatmap(
    lambda n: arrays(np.float64, (n, 2), elements=st.floats(-10, 10, width=32)))


@settings(max_examples=60, deadline=None)
@given(point_clouds, st.integers(1, 6), st.sampled_from(["product", "ratio"]))
def test_knn_graph_invariants(pts, k, form):
    n = len(pts)
    k = min(k, n - 1)
    if pdist(pts).max() == 0:
        return
    g = knn_graph(pts, k=k, sigma_scale=0.1, kernel_form=form)
    m = g.matrix.toarray()
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 0)
    assert np.all(m[m > 0] <= 1.0 + 1e-12)
    nn, _ = knn_indices(pts, k, "brute")
    allowed = np.zeros((n, n), bool)
    for i in range(n):
        allowed[i, nn[i]] = True
    allowed |= allowed.T
    assert not np.any((m > 0) & ~allowed)


@settings(max_examples=40, deadline=None)
@given(point_clouds, st.floats(0.1, 50.0))
def test_ratio_kernel_scale_invariant(pts, c):
    n = len(pts)
    if pdist(pts).max() == 0:
        return
    k = min(3, n - 1)
    g1 = knn_graph(pts, k=k, kernel_form="ratio").matrix.toarray()
    g2 = knn_graph(pts * c, k=k, kernel_form="ratio").matrix.toarray()
    assert np.allclose(g1, g2, rtol=1e-9, atol=1e-12)
