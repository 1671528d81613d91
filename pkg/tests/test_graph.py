"""Graph container, synthetic trees, homophily and centralities."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypie.graph import DisconnectedGraphError, Graph, centrality, gen_tree, homophily, most_central

from .oracles import brute_betweenness, random_connected_graph


def test_graph_canonicalises_edges():
    g = Graph(4, np.array([[1, 0], [0, 1], [2, 2], [3, 2]]))
    np.testing.assert_array_equal(g.edges, [[0, 1], [2, 3]])
    with pytest.raises(ValueError):
        Graph(3, np.array([[0, 3]]))
    with pytest.raises(ValueError):
        Graph(3, np.array([[0, 1]]), depth=[0, 0, 1])
    with pytest.raises(ValueError):
        Graph(3, np.array([[0, 1]]), features=np.zeros((2, 4)))


def test_preset_tree_facts():
    for variant in ("H", "L"):
        g = gen_tree(variant=variant)
        assert g.n == 1093 and g.num_edges == 1092
        assert g.num_classes == 4
        assert g.depth.min() == 0 and g.depth.max() == 6
        assert np.array_equal(np.bincount(g.depth), [3 ** k for k in range(7)])
        assert g.features.shape == (1093, 32)


def test_preset_homophily():
    assert round(homophily(gen_tree(variant="H")), 3) == 0.998
    assert round(homophily(gen_tree(variant="L")), 3) == 0.018


def test_small_tree():
    g = gen_tree(branching=2, node_budget=3, variant="H", feature_dim=4)
    np.testing.assert_array_equal(g.edges, [[0, 1], [0, 2]])
    np.testing.assert_array_equal(g.depth, [0, 1, 1])
    with pytest.raises(ValueError):
        gen_tree(node_budget=0)
    with pytest.raises(ValueError):
        gen_tree(branching=1)


def test_tree_labels():
    h = gen_tree(variant="H")
    # root alone in class 0; each depth-1 subtree is one class
    assert h.labels[0] == 0 and np.sum(h.labels == 0) == 1
    assert list(h.labels[1:4]) == [1, 2, 3]
    l_ = gen_tree(variant="L")
    assert np.all(l_.labels[l_.depth <= 3] == 0)
    for d, cls in ((4, 1), (5, 2), (6, 3)):
        assert np.all(l_.labels[l_.depth == d] == cls)


def test_tree_features_follow_class_gaussians():
    g = gen_tree(variant="L", seed=3)
    for cls in range(4):
        x = g.features[g.labels == cls]
        assert abs(x.mean() - cls) < 0.05
        assert abs(x.var() - 1.0) < 0.05


def test_gen_tree_seed_only_changes_features():
    a, b, c = gen_tree(seed=1), gen_tree(seed=1), gen_tree(seed=2)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.edges, c.edges)
    np.testing.assert_array_equal(a.labels, c.labels)
    np.testing.assert_array_equal(a.depth, c.depth)
    assert not np.array_equal(a.features, c.features)


def test_homophily_examples():
    g = Graph(3, np.array([[0, 1], [1, 2]]), labels=[1, 1, 1])
    assert homophily(g) == 1.0
    iso = Graph(4, np.array([[0, 1], [1, 2]]), labels=[0, 0, 1, 1])
    with pytest.warns(UserWarning, match="isolated"):
        h = homophily(iso)
    assert abs(h - (1.0 + 0.5 + 0.0) / 3) < 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_homophily_ignores_features(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 20))
    edges = random_connected_graph(n, 0.2, rng)
    labels = rng.integers(0, 3, n)
    g1 = Graph(n, np.array(edges), features=rng.normal(size=(n, 2)), labels=labels)
    g2 = g1.with_features(rng.normal(size=(n, 5)))
    assert homophily(g1) == homophily(g2)


def test_centrality_examples():
    path = Graph(3, np.array([[0, 1], [1, 2]]))
    assert centrality(path, "degree")[0] == 1.0
    star = Graph(5, np.array([[0, i] for i in range(1, 5)]))
    assert centrality(star, "betweenness")[0] == 6.0
    assert centrality(star, "closeness")[0] == 1.0
    assert most_central(star, "betweenness") == 0


def test_centrality_errors_and_ties():
    g = Graph(4, np.array([[0, 1], [2, 3]]))
    for kind in ("betweenness", "closeness"):
        with pytest.raises(DisconnectedGraphError):
            centrality(g, kind)
    with pytest.raises(ValueError):
        centrality(g, "pagerank")
    cycle = Graph(5, np.array([[i, (i + 1) % 5] for i in range(5)]))
    assert most_central(cycle, "betweenness") == 0


def test_betweenness_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 16))
        edges = random_connected_graph(n, float(rng.uniform(0.05, 0.4)), rng)
        bc = centrality(Graph(n, np.array(edges).reshape(-1, 2)), "betweenness")
        ref = brute_betweenness(n, edges)
        for v in range(n):
            assert abs(bc[v] - float(ref[v])) < 1e-9, (v, bc[v], ref[v])


def test_centralities_match_networkx():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(3, 25))
        edges = random_connected_graph(n, 0.15, rng)
        g = Graph(n, np.array(edges))
        G = nx.Graph()
        G.add_nodes_from(range(n))
        G.add_edges_from(edges)
        bc = nx.betweenness_centrality(G, normalized=False)
        cc = nx.closeness_centrality(G)
        np.testing.assert_allclose(centrality(g, "betweenness"), [bc[v] for v in range(n)], atol=1e-9)
        np.testing.assert_allclose(centrality(g, "closeness"), [cc[v] for v in range(n)], atol=1e-12)
