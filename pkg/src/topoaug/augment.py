"""Perturbation baselines: DropEdge, DropNode and node-feature masking.

Each call draws a fresh sample from ``rng``; the training loop calls them
once per epoch.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .graph import Graph


def _check_p(p: float) -> None:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"drop probability must be in [0, 1), got {p}")


def drop_edge(g: Graph, p: float, rng: np.random.Generator) -> Graph:
    """Remove each edge independently with probability ``p``."""
    _check_p(p)
    if p == 0.0 or g.num_edges == 0:
        return g
    keep = rng.random(g.num_edges) >= p
    ef = g.edge_features[keep] if g.edge_features is not None else None
    return g.with_edges(g.edges[keep], ef)


def drop_node(g: Graph, p: float, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Remove each node independently with probability ``p``, with its incident edges.

    Returns the reindexed subgraph and ``kept``, where ``kept[i]`` is the
    original index of new node ``i``. Features and labels follow their
    nodes.
    """
    _check_p(p)
    if p == 0.0:
        return g, np.arange(g.num_nodes)
    keep_mask = rng.random(g.num_nodes) >= p
    kept = np.flatnonzero(keep_mask)
    new_index = np.full(g.num_nodes, -1, dtype=np.int64)
    new_index[kept] = np.arange(len(kept))
    if g.num_edges:
        edge_keep = keep_mask[g.edges[:, 0]] & keep_mask[g.edges[:, 1]]
        edges = new_index[g.edges[edge_keep]]
        ef = g.edge_features[edge_keep] if g.edge_features is not None else None
    else:
        edges, ef = np.zeros((0, 2), dtype=np.int64), g.edge_features
    sub = Graph(
        len(kept),
        edges,
        g.node_features[kept] if g.node_features is not None else None,
        ef,
        g.labels[kept] if g.labels is not None else None,
    )
    return sub, kept


def mask_node_features(x: np.ndarray | Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Zero each feature column independently with probability ``p`` (no rescaling)."""
    _check_p(p)
    value = x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if p == 0.0:
        return Tensor(value)
    keep = rng.random(value.shape[1]) >= p
    return Tensor(value * keep[None, :])
