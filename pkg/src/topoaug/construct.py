"""Virtual hyperedge construction and combinatorial-complex assembly.

Three strategies produce a :class:`~topoaug.graph.HyperedgeSet`:

* :func:`clique_hyperedges` -- maximal cliques of the graph itself;
* :func:`window_hyperedges` -- nodes grouped by 1-D position (e.g. genomic
  coordinates on a chromosome);
* :func:`threshold_hyperedges` -- single-linkage groups of an auxiliary
  embedding (e.g. image embeddings).

:func:`build_combinatorial_complex` then stacks nodes (rank 0), simple
edges (rank 1) and hyperedges (rank 2).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Literal, Sequence

import numpy as np

from .graph import (
    SIMPLE_EDGE,
    SINGLETON,
    VIRTUAL_HYPEREDGE,
    Cell,
    CombinatorialComplex,
    Graph,
    HyperedgeSet,
    StructureError,
)

DEFAULT_MIN_SIZE = 3
DEFAULT_WINDOW = 200_000


@dataclass(frozen=True)
class CliqueConfig:
    min_size: int = DEFAULT_MIN_SIZE

    def __post_init__(self):
        if self.min_size < 2:
            raise StructureError(f"clique min_size must be >= 2, got {self.min_size}")


@dataclass(frozen=True)
class WindowConfig:
    """Positional grouping parameters.

    ``positions`` holds one integer coordinate per node. ``partitions``
    optionally assigns each node a key (chromosome); grouping never crosses
    partitions.
    """

    positions: Sequence[int]
    partitions: Sequence[Hashable] | None = None
    window: int = DEFAULT_WINDOW
    min_size: int = DEFAULT_MIN_SIZE

    def __post_init__(self):
        if self.window <= 0:
            raise StructureError(f"window must be positive, got {self.window}")
        if self.min_size < 1:
            raise StructureError(f"min_size must be >= 1, got {self.min_size}")
        if self.partitions is not None and len(self.partitions) != len(self.positions):
            raise StructureError(
                f"partitions has {len(self.partitions)} entries but positions has {len(self.positions)}"
            )


@dataclass(frozen=True)
class ThresholdConfig:
    """Embedding-proximity grouping parameters. ``tau`` has no default."""

    embeddings: np.ndarray
    tau: float
    metric: Literal["euclidean", "cosine"] = "euclidean"
    min_size: int = DEFAULT_MIN_SIZE

    def __post_init__(self):
        if not self.tau > 0:
            raise StructureError(f"tau must be positive, got {self.tau}")
        if self.metric not in ("euclidean", "cosine"):
            raise StructureError(f"unknown metric {self.metric!r}")
        if self.min_size < 1:
            raise StructureError(f"min_size must be >= 1, got {self.min_size}")


# ---------------------------------------------------------------------------
# Maximal cliques
# ---------------------------------------------------------------------------


def _degeneracy_order(nbrs: list[set[int]]) -> list[int]:
    n = len(nbrs)
    deg = [len(s) for s in nbrs]
    buckets: dict[int, set[int]] = defaultdict(set)
    for v in range(n):
        buckets[deg[v]].add(v)
    removed = [False] * n
    order = []
    d = 0
    for _ in range(n):
        d = max(d - 1, 0)
        while not buckets[d]:
            d += 1
        v = min(buckets[d])
        buckets[d].discard(v)
        removed[v] = True
        order.append(v)
        for u in nbrs[v]:
            if not removed[u]:
                buckets[deg[u]].discard(u)
                deg[u] -= 1
                buckets[deg[u]].add(u)
    return order


def _choose_pivot(p: set[int], x: set[int], nbrs: list[set[int]]) -> int:
    # max |P & N(u)|, ties to the smallest index
    best, best_score = -1, -1
    for u in sorted(p | x):
        score = len(p & nbrs[u])
        if score > best_score:
            best, best_score = u, score
    return best


def _bron_kerbosch(r: list[int], p: set[int], x: set[int], nbrs: list[set[int]], out: list[tuple[int, ...]]):
    if not p and not x:
        out.append(tuple(sorted(r)))
        return
    if not p:
        return
    u = _choose_pivot(p, x, nbrs)
    for v in sorted(p - nbrs[u]):
        r.append(v)
        _bron_kerbosch(r, p & nbrs[v], x & nbrs[v], nbrs, out)
        r.pop()
        p.discard(v)
        x.add(v)


def maximal_cliques(g: Graph) -> HyperedgeSet:
    """All maximal cliques of ``g``, canonically ordered.

    Bron--Kerbosch with Tomita pivoting (pivot maximizes ``|P & N(u)|``,
    ties broken by smallest node index). The top level walks a degeneracy
    ordering so each recursion starts from a small candidate set. Isolated
    nodes are returned as 1-cliques; filter with :func:`filter_by_size`.
    """
    nbrs = g.neighbors()
    order = _degeneracy_order(nbrs)
    position = {v: i for i, v in enumerate(order)}
    out: list[tuple[int, ...]] = []
    for v in order:
        later = {u for u in nbrs[v] if position[u] > position[v]}
        earlier = nbrs[v] - later
        _bron_kerbosch([v], later, earlier, nbrs, out)
    return HyperedgeSet(out, min_size=1)


def filter_by_size(h: HyperedgeSet, min_size: int) -> HyperedgeSet:
    """Keep only hyperedges with at least ``min_size`` members."""
    return HyperedgeSet((e for e in h if len(e) >= min_size), min_size=max(min_size, 1))


def clique_hyperedges(g: Graph, cfg: CliqueConfig = CliqueConfig()) -> HyperedgeSet:
    return filter_by_size(maximal_cliques(g), cfg.min_size)


# ---------------------------------------------------------------------------
# Positional windows
# ---------------------------------------------------------------------------


def window_hyperedges(g: Graph, cfg: WindowConfig) -> HyperedgeSet:
    """Group nodes whose positions fall inside a window anchored at each group's first node.

    Within each partition nodes are sorted by ``(position, index)``. A group
    is opened at the first node (its anchor); the next node joins the group
    while its position is ``<= anchor + window``, otherwise it opens a new
    group. Groups with at least ``cfg.min_size`` members become hyperedges.
    """
    n = g.num_nodes
    if len(cfg.positions) != n:
        raise StructureError(f"positions has {len(cfg.positions)} entries but the graph has {n} nodes")
    positions = []
    for v, p in enumerate(cfg.positions):
        if p is None:
            raise StructureError(f"node {v} has no position")
        positions.append(int(p))
    keys = cfg.partitions if cfg.partitions is not None else [None] * n

    by_partition: dict = defaultdict(list)
    for v in range(n):
        if keys[v] is None and cfg.partitions is not None:
            raise StructureError(f"node {v} has no partition key")
        by_partition[keys[v]].append(v)

    groups = []
    for members in by_partition.values():
        members.sort(key=lambda v: (positions[v], v))
        current = [members[0]]
        anchor = positions[members[0]]
        for v in members[1:]:
            if positions[v] > anchor + cfg.window:
                groups.append(current)
                current, anchor = [v], positions[v]
            else:
                current.append(v)
        groups.append(current)
    return HyperedgeSet((grp for grp in groups if len(grp) >= cfg.min_size), min_size=cfg.min_size)


# ---------------------------------------------------------------------------
# Embedding thresholds
# ---------------------------------------------------------------------------


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, u: int) -> int:
        parent = self.parent
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    def union(self, u: int, v: int) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        self.size[ru] += self.size[rv]
        return True

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for v in range(len(self.parent)):
            out[self.find(v)].append(v)
        return sorted(out.values())


def _pair_distances(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        return 1.0 - a @ b.T
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(sq, 0.0))


def threshold_hyperedges(cfg: ThresholdConfig, block_size: int = 1024) -> HyperedgeSet:
    """Connected components of the graph linking every pair within distance ``tau``.

    Equivalent to single-linkage clustering cut at ``tau``. Distances are
    computed in row blocks so memory stays ``O(block_size * n)``. The
    cosine metric is ``1 - cos(a, b)``.
    """
    emb = np.asarray(cfg.embeddings, dtype=np.float64)
    if emb.ndim != 2:
        raise StructureError(f"embeddings must be a 2-D matrix, got shape {emb.shape}")
    if not np.all(np.isfinite(emb)):
        bad = int(np.argwhere(~np.isfinite(emb))[0, 0])
        raise StructureError(f"embedding row {bad} contains non-finite values")
    if cfg.metric == "cosine":
        norms = np.linalg.norm(emb, axis=1)
        if np.any(norms == 0):
            raise StructureError(f"embedding row {int(np.argmin(norms))} has zero norm; cosine distance undefined")
        emb = emb / norms[:, None]

    n = len(emb)
    uf = UnionFind(n)
    for start in range(0, n, block_size):
        block = emb[start : start + block_size]
        d = _pair_distances(block, emb, cfg.metric)
        ii, jj = np.nonzero(d <= cfg.tau)
        for i, j in zip((ii + start).tolist(), jj.tolist()):
            if i < j:
                uf.union(i, j)
    return HyperedgeSet((grp for grp in uf.groups() if len(grp) >= cfg.min_size), min_size=cfg.min_size)


# ---------------------------------------------------------------------------
# Complex assembly
# ---------------------------------------------------------------------------


def build_combinatorial_complex(
    g: Graph, h: HyperedgeSet, *, allow_singleton_hyperedges: bool = False
) -> CombinatorialComplex:
    """Assemble nodes, simple edges and hyperedges into a rank-0/1/2 complex.

    A hyperedge that coincides with an existing lower-rank cell (a simple
    edge, or a singleton when those are admitted) is dropped so every cell
    has one well-defined rank.
    """
    h.check_members(g.num_nodes)
    cells = [Cell((v,), 0, SINGLETON) for v in range(g.num_nodes)]
    edge_keys = set()
    for u, v in g.edges.tolist():
        cells.append(Cell((u, v), 1, SIMPLE_EDGE))
        edge_keys.add((u, v))
    for he in h:
        if len(he) < 2:
            if not allow_singleton_hyperedges:
                raise StructureError(
                    f"hyperedge {list(he)} has fewer than 2 members; pass allow_singleton_hyperedges=True to admit it"
                )
            continue  # coincides with the rank-0 singleton
        if len(he) == 2 and he in edge_keys:
            continue
        cells.append(Cell(he, 2, VIRTUAL_HYPEREDGE))
    return CombinatorialComplex(g.num_nodes, cells)


def complex_statistics(g: Graph, h: HyperedgeSet | CombinatorialComplex) -> dict[str, float]:
    """Dataset statistics in the style of a summary table."""
    if isinstance(h, CombinatorialComplex):
        hyper = h.cells_of_rank(2)
    else:
        hyper = list(h)
    n = g.num_nodes
    return {
        "num_nodes": n,
        "num_edges": g.num_edges,
        "num_hyperedges": len(hyper),
        "avg_node_degree": (2.0 * g.num_edges / n) if n else 0.0,
        "avg_hyperedge_degree": float(np.mean([len(e) for e in hyper])) if hyper else 0.0,
    }
