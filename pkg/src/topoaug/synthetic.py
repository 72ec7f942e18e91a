"""Synthetic datasets for desk-scale experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, HyperedgeSet

_PLANTED_STREAM = 3


@dataclass(frozen=True)
class PlantedBenchmark:
    graph: Graph
    hyperedges: HyperedgeSet
    labels: np.ndarray


def random_edges(num_nodes: int, num_edges: int, rng: np.random.Generator) -> np.ndarray:
    """``num_edges`` distinct undirected non-loop pairs drawn uniformly."""
    max_edges = num_nodes * (num_nodes - 1) // 2
    if num_edges > max_edges:
        raise ValueError(f"cannot draw {num_edges} distinct edges on {num_nodes} nodes")
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < num_edges:
        u, v = rng.integers(0, num_nodes, size=2)
        if u != v:
            chosen.add((int(min(u, v)), int(max(u, v))))
    return np.array(sorted(chosen), dtype=np.int64).reshape(-1, 2)


def make_planted_benchmark(
    num_nodes: int,
    num_groups: int,
    noise_edges: int,
    seed: int,
    num_features: int = 16,
) -> PlantedBenchmark:
    """Labels recoverable only through hyperedge membership.

    Nodes are shuffled into ``num_groups`` equal groups; the label is the
    group id and each group is one hyperedge. Simple edges are uniform
    random pairs and node features are standard normal noise, both drawn
    independently of the groups.
    """
    if num_groups < 1 or num_nodes % num_groups:
        raise ValueError(f"num_nodes={num_nodes} must be divisible by num_groups={num_groups}")
    rng = np.random.default_rng([seed, _PLANTED_STREAM])
    perm = rng.permutation(num_nodes)
    size = num_nodes // num_groups
    labels = np.empty(num_nodes, dtype=np.int64)
    groups = []
    for k in range(num_groups):
        members = perm[k * size : (k + 1) * size]
        labels[members] = k
        groups.append(members.tolist())
    edges = random_edges(num_nodes, noise_edges, rng)
    features = rng.standard_normal((num_nodes, num_features))
    graph = Graph(num_nodes, edges, node_features=features, labels=labels)
    return PlantedBenchmark(graph, HyperedgeSet(groups, min_size=1), labels)


def two_triangles() -> Graph:
    """Two disjoint triangles ``{0,1,2}`` and ``{3,4,5}``."""
    return Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def cycle(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def moon_moser(n: int) -> Graph:
    """Complete multipartite graph with parts of size 3 (``3^(n/3)`` maximal cliques)."""
    if n % 3:
        raise ValueError(f"n must be a multiple of 3, got {n}")
    part = [i // 3 for i in range(n)]
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if part[i] != part[j]])
