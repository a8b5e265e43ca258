import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdfl.topology import (Graph, algebraic_connectivity, degree_matrix, induced_topology, is_connected,
                           laplacian)
from oracles import bfs_connected, jacobi_eigenvalues

PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])
K3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def test_degree_matrix():
    assert np.array_equal(degree_matrix(PATH3), np.diag([1.0, 2.0, 1.0]))
    assert np.array_equal(degree_matrix(Graph.from_edges(2, [])), np.zeros((2, 2)))
    assert np.array_equal(degree_matrix(K3), np.diag([2.0, 2.0, 2.0]))


def test_laplacian():
    assert np.array_equal(laplacian(K3), [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    assert np.array_equal(laplacian(Graph.from_edges(1, [])), [[0]])
    assert np.array_equal(laplacian(PATH3), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_algebraic_connectivity_examples():
    assert algebraic_connectivity(Graph.from_edges(2, [])) == pytest.approx(0.0, abs=1e-12)
    # Jacobi oracle: K3 spectrum {0, 3, 3}, path spectrum {0, 1, 3}
    assert jacobi_eigenvalues(laplacian(K3))[1] == pytest.approx(3.0)
    assert jacobi_eigenvalues(laplacian(PATH3))[1] == pytest.approx(1.0)
    assert algebraic_connectivity(K3) == pytest.approx(3.0, rel=1e-12)
    assert algebraic_connectivity(PATH3) == pytest.approx(1.0, rel=1e-12)
    assert algebraic_connectivity(Graph.from_edges(1, [])) == 0.0


@pytest.mark.parametrize("n", [5, 8])
def test_complete_graph_spectrum(n):
    g = Graph.from_edges(n, itertools.combinations(range(n), 2))
    assert algebraic_connectivity(g) == pytest.approx(n)


def test_invalid_graphs_rejected():
    with pytest.raises(ValueError):
        Graph(2, np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        Graph(2, np.array([[1, 0], [0, 0]]))


def test_induced_topology_examples():
    assert np.array_equal(induced_topology({0, 1}, 2).adjacency, [[0, 1], [1, 0]])
    star = induced_topology({0}, 3)
    assert star.neighbors(0) == [1, 2] and star.neighbors(1) == [0] and star.neighbors(2) == [0]
    g = induced_topology({0, 1, 2}, 4)
    expected = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (0, 3)])
    assert np.array_equal(g.adjacency, expected.adjacency)
    with pytest.raises(ValueError):
        induced_topology(set(), 3)


graphs = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2).map(
        lambda bits: Graph.from_edges(n, [e for e, b in zip(itertools.combinations(range(n), 2), bits) if b])))


@given(graphs)
@settings(max_examples=300, deadline=None)
def test_connectivity_matches_bfs(g):
    assert is_connected(g) == bfs_connected(g.adjacency)
    lap = laplacian(g)
    assert np.abs(lap.sum(axis=1)).max() <= 1e-12
    assert np.array_equal(np.diag(degree_matrix(g)), g.adjacency.sum(axis=1))


def test_connectivity_exhaustive_small():
    for n in range(1, 6):
        pairs = list(itertools.combinations(range(n), 2))
        for bits in itertools.product([0, 1], repeat=len(pairs)):
            g = Graph.from_edges(n, [e for e, b in zip(pairs, bits) if b])
            assert is_connected(g) == bfs_connected(g.adjacency)
            if n > 1:
                assert (algebraic_connectivity(g) > 1e-9) == bfs_connected(g.adjacency)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.integers(0, n - 1), min_size=1))))
def test_induced_topology_always_connected(args):
    n, sel = args
    g = induced_topology(sel, n)
    if n >= 2:
        assert algebraic_connectivity(g) > 1e-9
    assert bfs_connected(g.adjacency)
