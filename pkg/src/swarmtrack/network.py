"""Undirected sensor graph and the fixed fusion weights built on it."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class TopologyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    n_nodes: int
    adjacency: np.ndarray  # symmetric bool, false diagonal

    @cached_property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    @property
    def max_degree(self):
        return int(self.degrees.max()) if self.n_nodes else 0

    @property
    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))


def _components(n, adj):
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def build_graph(n, edges):
    """Validate an undirected edge list and return a connected :class:`Graph`."""
    if n < 1:
        raise TopologyError("graph needs at least one node")
    adj = np.zeros((n, n), dtype=bool)
    for e in edges:
        i, j = (int(v) for v in e)
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i}, {j}) out of range for {n} nodes")
        if i == j:
            raise TopologyError(f"self-loop on node {i} is not allowed")
        adj[i, j] = adj[j, i] = True
    comps = _components(n, adj)
    if len(comps) > 1:
        isolated = [c for c in comps if 0 not in c]
        raise TopologyError(f"graph is disconnected: nodes {isolated[0]} unreachable from node 0")
    adj.setflags(write=False)
    return Graph(n, adj)


def ring_edges(n):
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def star_edges(n, hub=0):
    return [(hub, j) for j in range(n) if j != hub]


PRESETS = {"ring4": (4, ring_edges(4)), "star4": (4, star_edges(4))}


def neighbors(g, i):
    if not 0 <= i < g.n_nodes:
        raise IndexError(i)
    return np.flatnonzero(g.adjacency[i]).tolist()


def diffusion_weights(g):
    """Row-stochastic weights: 1/(1 + max degree) per neighbour, remainder on the diagonal."""
    c = 1.0 / (1.0 + g.max_degree)
    C = np.where(g.adjacency, c, 0.0)
    np.fill_diagonal(C, 1.0 - C.sum(axis=1))
    return C


def metropolis_weights(g):
    """Doubly stochastic Metropolis-Hastings weights for average consensus."""
    d = g.degrees
    C = np.where(g.adjacency, 1.0 / (1.0 + np.maximum.outer(d, d)), 0.0)
    np.fill_diagonal(C, 1.0 - C.sum(axis=1))
    return C
