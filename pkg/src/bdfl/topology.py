"""Per-round P2P communication graph and the connectivity test on its Laplacian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigenSolverError

# eigen-solvers return tiny non-zero values for the null eigenvalue
CONNECTIVITY_TOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph on ``num_nodes`` clients."""

    num_nodes: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.int8)
        if self.num_nodes < 1 or a.shape != (self.num_nodes, self.num_nodes):
            raise ValueError(f"adjacency must be {self.num_nodes}x{self.num_nodes}, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if np.any((a != 0) & (a != 1)):
            raise ValueError("adjacency must be binary")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        a = np.zeros((num_nodes, num_nodes), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            a[i, j] = a[j, i] = 1
        return cls(num_nodes, a)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]


def degree_matrix(g: Graph) -> np.ndarray:
    return np.diag(g.adjacency.sum(axis=1).astype(float))


def laplacian(g: Graph) -> np.ndarray:
    return degree_matrix(g) - g.adjacency.astype(float)


def algebraic_connectivity(g: Graph) -> float:
    """Second-smallest Laplacian eigenvalue (0 for a single node)."""
    if g.num_nodes == 1:
        return 0.0
    lap = laplacian(g)
    try:
        eig = np.linalg.eigvalsh(lap)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(lap, exc) from exc
    return max(float(eig[1]), 0.0)


def is_connected(g: Graph, tol: float = CONNECTIVITY_TOL) -> bool:
    # a lone client is trivially connected even though lambda2 is defined as 0
    return g.num_nodes == 1 or algebraic_connectivity(g) > tol


def induced_topology(selected, num_nodes: int) -> Graph:
    """Round topology: a clique on the trainers, every other client hung off a hub.

    The hub is the lowest-indexed selected client. Non-trainers only need a
    path to receive the mined block, so one link each is enough.
    """
    sel = sorted(set(int(i) for i in selected))
    if not sel:
        raise ValueError("selection must contain at least one client")
    if sel[0] < 0 or sel[-1] >= num_nodes:
        raise ValueError(f"selected ids out of range [0, {num_nodes})")
    a = np.zeros((num_nodes, num_nodes), dtype=np.int8)
    idx = np.array(sel)
    a[np.ix_(idx, idx)] = 1
    np.fill_diagonal(a, 0)
    hub = sel[0]
    for j in range(num_nodes):
        if j not in sel:
            a[hub, j] = a[j, hub] = 1
    return Graph(num_nodes, a)
