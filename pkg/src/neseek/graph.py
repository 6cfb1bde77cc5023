"""Undirected communication graphs and the consensus matrices built on them.

Nodes are 0-based in the Python API. Scenario files use 1-based labels; the
loader converts.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .linalg import HURWITZ_MARGIN, is_hurwitz


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        return cls(n, frozenset((int(i), int(j)) for i, j in edges))

    def neighbors(self, i: int) -> list[int]:
        return sorted({j for e in self.edges if i in e for j in e if j != i})

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def cycle(n: int) -> Graph:
    if n < 3:
        return path(n)
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def adjacency(g: Graph) -> np.ndarray:
    adj = np.zeros((g.n, g.n))
    for i, j in g.edges:
        adj[i, j] = adj[j, i] = 1.0
    return adj


def laplacian(g: Graph) -> np.ndarray:
    """Unit-weight Laplacian ``D - A``; rows sum to exactly zero."""
    adj = adjacency(g)
    return np.diag(adj.sum(axis=1)) - adj


def is_connected(g: Graph) -> bool:
    seen = {0}
    queue = deque([0])
    nbrs = {i: g.neighbors(i) for i in range(g.n)}
    while queue:
        for j in nbrs[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == g.n


def algebraic_connectivity(g: Graph) -> float:
    lam = np.linalg.eigvalsh(laplacian(g))
    return float(lam[1]) if g.n > 1 else 0.0


def boundary_layer_matrix(g: Graph) -> np.ndarray:
    """Fast-time matrix ``[[-I - L, -L], [L, 0]]`` of the consensus estimator."""
    if not is_connected(g):
        raise DisconnectedGraphError("consensus needs a connected graph")
    lap = laplacian(g)
    eye = np.eye(g.n)
    return np.block([[-eye - lap, -lap], [lap, np.zeros_like(lap)]])


def orthonormal_completion(n: int) -> np.ndarray:
    """Columns completing ``1/sqrt(n)`` to an orthonormal basis (n × (n-1)).

    Modified Gram-Schmidt over the unit vectors, seeded with the kernel
    direction of a connected Laplacian.
    """
    basis = [np.full(n, 1.0 / np.sqrt(n))]
    for k in range(n):
        v = np.zeros(n)
        v[k] = 1.0
        for q in basis:
            v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
        if len(basis) == n:
            break
    return np.column_stack(basis[1:]) if n > 1 else np.zeros((1, 0))


def reduced_boundary_layer_matrix(g: Graph) -> np.ndarray:
    """Boundary-layer matrix with the conserved ``sum(omega)`` direction removed.

    ``[[-I - L, -L R], [R^T L, 0]]`` with R the completion of 1/sqrt(n).
    """
    if not is_connected(g):
        raise DisconnectedGraphError("consensus needs a connected graph")
    lap = laplacian(g)
    r = orthonormal_completion(g.n)
    m = r.shape[1]
    return np.block([[-np.eye(g.n) - lap, -lap @ r], [r.T @ lap, np.zeros((m, m))]])


def boundary_layer_hurwitz(g: Graph, margin: float = HURWITZ_MARGIN) -> bool:
    return is_hurwitz(reduced_boundary_layer_matrix(g), margin)
