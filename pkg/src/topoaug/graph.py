"""Core graph, hypergraph and combinatorial-complex types.

Everything here is immutable after construction. Node indices are
``0..num_nodes-1``; simple edges are stored with ``u < v``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class StructureError(ValueError):
    """Raised when an input violates a structural invariant."""


# ---------------------------------------------------------------------------
# Sparse matrices
# ---------------------------------------------------------------------------


class SparseMatrix:
    """Row-compressed real matrix with canonical storage.

    Column indices are strictly increasing within each row and explicit
    zeros are never stored. Backed by :class:`scipy.sparse.csr_matrix`.
    """

    __slots__ = ("_csr",)

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        csr.data.setflags(write=False)
        csr.indices.setflags(write=False)
        csr.indptr.setflags(write=False)
        self._csr = csr

    @classmethod
    def from_entries(cls, rows, cols, values, shape: tuple[int, int]) -> "SparseMatrix":
        """Build from coordinate triplets; duplicates are summed."""
        coo = sp.coo_matrix(
            (np.asarray(values, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=shape,
        )
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        return cls(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._csr.T.tocsr())

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=0)).ravel()

    def scale_rows(self, factors) -> "SparseMatrix":
        return SparseMatrix(sp.diags(np.asarray(factors, dtype=np.float64)) @ self._csr)

    def scale_cols(self, factors) -> "SparseMatrix":
        return SparseMatrix(self._csr @ sp.diags(np.asarray(factors, dtype=np.float64)))

    def dot(self, dense: np.ndarray) -> np.ndarray:
        return np.asarray(self._csr @ dense)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix) or self.shape != other.shape:
            return False
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


def _freeze(arr: np.ndarray | None) -> np.ndarray | None:
    if arr is not None:
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with optional node/edge features and labels.

    Parameters
    ----------
    num_nodes : int
        Number of nodes.
    edges : sequence of (u, v)
        Undirected edges. Each pair is oriented to ``u < v``; self-loops and
        duplicates raise :class:`StructureError`. Input edge order is kept so
        that ``edge_features`` rows stay aligned.
    node_features : array, shape = (num_nodes, d_v), optional
    edge_features : array, shape = (num_edges, d_e), optional
        Carried through ingestion; no hyperedge strategy reads it.
    labels : array, shape = (num_nodes,) or (num_nodes, k), optional
        Class indices or real regression targets.
    """

    num_nodes: int
    edges: np.ndarray
    node_features: np.ndarray | None = None
    edge_features: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 0:
            raise StructureError(f"num_nodes must be non-negative, got {n}")
        object.__setattr__(self, "num_nodes", n)

        edges = np.asarray(self.edges, dtype=np.int64)
        if edges.size == 0:
            edges = np.zeros((0, 2), dtype=np.int64)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise StructureError(f"edges must have shape (E, 2), got {edges.shape}")
        edges = np.sort(edges, axis=1)
        seen: set[tuple[int, int]] = set()
        for i, (u, v) in enumerate(edges.tolist()):
            if u < 0 or v >= n:
                raise StructureError(f"edge {i} ({u}, {v}) has endpoint outside [0, {n})")
            if u == v:
                raise StructureError(f"edge {i} is a self-loop on node {u}")
            if (u, v) in seen:
                raise StructureError(f"edge {i} ({u}, {v}) is a duplicate")
            seen.add((u, v))
        object.__setattr__(self, "edges", _freeze(edges))

        if self.node_features is not None:
            x = np.array(self.node_features, dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != n:
                raise StructureError(f"node_features must have shape ({n}, d), got {x.shape}")
            object.__setattr__(self, "node_features", _freeze(x))
        if self.edge_features is not None:
            e = np.array(self.edge_features, dtype=np.float64)
            if e.ndim != 2 or e.shape[0] != len(edges):
                raise StructureError(f"edge_features must have shape ({len(edges)}, d), got {e.shape}")
            object.__setattr__(self, "edge_features", _freeze(e))
        if self.labels is not None:
            y = np.array(self.labels)
            if y.shape[0] != n:
                raise StructureError(f"labels must have {n} rows, got {y.shape[0]}")
            object.__setattr__(self, "labels", _freeze(y))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def neighbors(self) -> list[set[int]]:
        """Adjacency lists as sets, one per node."""
        nbrs: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges.tolist():
            nbrs[u].add(v)
            nbrs[v].add(u)
        return nbrs

    def with_edges(self, edges, edge_features=None) -> "Graph":
        return Graph(self.num_nodes, edges, self.node_features, edge_features, self.labels)

    def canonical(self) -> tuple:
        """Hashable canonical form used for structural equality checks."""
        return (self.num_nodes, tuple(sorted(self.edge_set())))


# ---------------------------------------------------------------------------
# Hyperedges and complexes
# ---------------------------------------------------------------------------


class HyperedgeSet:
    """Deduplicated, canonically ordered collection of node subsets.

    Hyperedges are stored as sorted tuples and the collection is sorted
    lexicographically. Every hyperedge must have at least ``min_size``
    members.
    """

    __slots__ = ("_edges", "min_size")

    def __init__(self, hyperedges: Iterable[Iterable[int]] = (), min_size: int = 1):
        if min_size < 1:
            raise StructureError(f"min_size must be >= 1, got {min_size}")
        canon = set()
        for i, he in enumerate(hyperedges):
            members = tuple(sorted({int(v) for v in he}))
            if len(members) < min_size:
                raise StructureError(
                    f"hyperedge {i} {list(members)} has {len(members)} members, below min_size={min_size}"
                )
            if members and members[0] < 0:
                raise StructureError(f"hyperedge {i} {list(members)} has a negative member")
            canon.add(members)
        self._edges: tuple[tuple[int, ...], ...] = tuple(sorted(canon))
        self.min_size = int(min_size)

    @property
    def hyperedges(self) -> tuple[tuple[int, ...], ...]:
        return self._edges

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self):
        return iter(self._edges)

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self._edges[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, HyperedgeSet) and self._edges == other._edges

    def __hash__(self) -> int:
        return hash(self._edges)

    def __repr__(self) -> str:
        return f"HyperedgeSet({[list(e) for e in self._edges]}, min_size={self.min_size})"

    def as_sets(self) -> set[frozenset[int]]:
        return {frozenset(e) for e in self._edges}

    def check_members(self, num_nodes: int) -> None:
        for i, he in enumerate(self._edges):
            if he and he[-1] >= num_nodes:
                raise StructureError(
                    f"hyperedge {i} {list(he)} references node {he[-1]} outside [0, {num_nodes})"
                )


SINGLETON = "singleton"
SIMPLE_EDGE = "simple_edge"
VIRTUAL_HYPEREDGE = "virtual_hyperedge"
PROVENANCES = (SINGLETON, SIMPLE_EDGE, VIRTUAL_HYPEREDGE)


@dataclass(frozen=True)
class Cell:
    nodes: tuple[int, ...]
    rank: int
    provenance: str


class CombinatorialComplex:
    """Cells of rank 0 (nodes), 1 (simple edges) and 2 (virtual hyperedges).

    The constructor canonicalizes cell order (rank ascending, then members
    lexicographically) but does not enforce validity; use
    :func:`validate_complex` for that. Hand-built invalid complexes are
    allowed so that the validator can be exercised.
    """

    __slots__ = ("num_nodes", "cells")

    def __init__(self, num_nodes: int, cells: Iterable[Cell | tuple]):
        parsed = []
        for c in cells:
            if not isinstance(c, Cell):
                nodes, rank, *rest = c
                prov = rest[0] if rest else {0: SINGLETON, 1: SIMPLE_EDGE}.get(int(rank), VIRTUAL_HYPEREDGE)
                c = Cell(tuple(sorted(int(v) for v in nodes)), int(rank), prov)
            else:
                c = Cell(tuple(sorted(c.nodes)), int(c.rank), c.provenance)
            if c.rank not in (0, 1, 2):
                raise StructureError(f"cell {list(c.nodes)} has rank {c.rank}; ranks must be in {{0, 1, 2}}")
            if c.provenance not in PROVENANCES:
                raise StructureError(f"cell {list(c.nodes)} has unknown provenance {c.provenance!r}")
            if not c.nodes:
                raise StructureError("cells must be non-empty")
            if c.nodes[0] < 0 or c.nodes[-1] >= num_nodes:
                raise StructureError(f"cell {list(c.nodes)} references a node outside [0, {num_nodes})")
            parsed.append(c)
        parsed.sort(key=lambda c: (c.rank, c.nodes))
        self.num_nodes = int(num_nodes)
        self.cells: tuple[Cell, ...] = tuple(parsed)

    def __len__(self) -> int:
        return len(self.cells)

    def cells_of_rank(self, *ranks: int) -> list[tuple[int, ...]]:
        return [c.nodes for c in self.cells if c.rank in ranks]

    def rank_of(self, nodes: Iterable[int]) -> int | None:
        key = tuple(sorted(nodes))
        for c in self.cells:
            if c.nodes == key:
                return c.rank
        return None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CombinatorialComplex)
            and self.num_nodes == other.num_nodes
            and self.cells == other.cells
        )

    def __repr__(self) -> str:
        counts = [len(self.cells_of_rank(r)) for r in (0, 1, 2)]
        return f"CombinatorialComplex(num_nodes={self.num_nodes}, cells_per_rank={counts})"


@dataclass
class ValidationReport:
    missing_singletons: list[int] = field(default_factory=list)
    order_violations: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)
    duplicate_cells: list[tuple[int, ...]] = field(default_factory=list)
    rank_mismatches: list[tuple[tuple[int, ...], int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing_singletons or self.order_violations or self.duplicate_cells or self.rank_mismatches)

    def __len__(self) -> int:
        return (
            len(self.missing_singletons)
            + len(self.order_violations)
            + len(self.duplicate_cells)
            + len(self.rank_mismatches)
        )

    def messages(self) -> list[str]:
        out = [f"missing singleton cell {{{v}}}" for v in self.missing_singletons]
        out += [
            f"rank order violated: {list(x)} is a subset of {list(y)} but has higher rank"
            for x, y in self.order_violations
        ]
        out += [f"duplicate cell {list(c)}" for c in self.duplicate_cells]
        out += [f"cell {list(c)} has rank {r} inconsistent with provenance {p}" for c, r, p in self.rank_mismatches]
        return out


_EXPECTED_RANK = {SINGLETON: 0, SIMPLE_EDGE: 1, VIRTUAL_HYPEREDGE: 2}


def validate_complex(cc: CombinatorialComplex) -> ValidationReport:
    """List every violated combinatorial-complex invariant.

    Checks that each node has a rank-0 singleton cell, that no cell appears
    twice, that ranks agree with provenance, and that the rank function is
    order-preserving (``x <= y`` implies ``rk(x) <= rk(y)``).
    """
    report = ValidationReport()

    by_key: dict[tuple[int, ...], int] = {}
    for c in cc.cells:
        if c.nodes in by_key:
            report.duplicate_cells.append(c.nodes)
        else:
            by_key[c.nodes] = c.rank
        if _EXPECTED_RANK[c.provenance] != c.rank:
            report.rank_mismatches.append((c.nodes, c.rank, c.provenance))

    for v in range(cc.num_nodes):
        if by_key.get((v,)) != 0:
            report.missing_singletons.append(v)

    # Supersets of x are found by intersecting the per-node cell lists of
    # x's members, which avoids a full pairwise scan.
    containing: dict[int, list[int]] = defaultdict(list)
    uniq = list(by_key.items())
    for idx, (nodes, _) in enumerate(uniq):
        for v in nodes:
            containing[v].append(idx)
    for nodes, rank in uniq:
        lists = sorted((containing[v] for v in nodes), key=len)
        candidates = set(lists[0])
        for other in lists[1:]:
            candidates.intersection_update(other)
            if not candidates:
                break
        for j in candidates:
            sup, sup_rank = uniq[j]
            if sup != nodes and rank > sup_rank:
                report.order_violations.append((nodes, sup))
    report.order_violations.sort()
    return report


# ---------------------------------------------------------------------------
# Matrices and statistics
# ---------------------------------------------------------------------------


def build_adjacency(g: Graph) -> SparseMatrix:
    """Symmetric binary adjacency matrix with zero diagonal."""
    n = g.num_nodes
    if g.num_edges == 0:
        return SparseMatrix(sp.csr_matrix((n, n)))
    u, v = g.edges[:, 0], g.edges[:, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    return SparseMatrix.from_entries(rows, cols, np.ones(len(rows)), (n, n))


def normalize_adjacency_sym(a: SparseMatrix) -> SparseMatrix:
    """Return ``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    n, m = a.shape
    if n != m:
        raise StructureError(f"adjacency must be square, got {a.shape}")
    a_hat = a.csr + sp.identity(n, format="csr")
    d_inv_sqrt = 1.0 / np.sqrt(np.asarray(a_hat.sum(axis=1)).ravel())
    return SparseMatrix(sp.diags(d_inv_sqrt) @ a_hat @ sp.diags(d_inv_sqrt))


def mean_adjacency(a: SparseMatrix) -> SparseMatrix:
    """Row-normalized adjacency ``D^-1 A``; rows of isolated nodes are zero."""
    deg = a.row_sums()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return a.scale_rows(inv)


def incidence_matrix(
    cells: HyperedgeSet | CombinatorialComplex | Sequence[Sequence[int]],
    num_nodes: int,
    ranks: Iterable[int] | None = None,
) -> SparseMatrix:
    """Binary ``|V| x #cells`` incidence matrix.

    Column ``j`` has ones at the members of cell ``j``, in canonical cell
    order. For a complex, ``ranks`` restricts which cells become columns
    (default: all of them).
    """
    if isinstance(cells, CombinatorialComplex):
        keep = set(ranks) if ranks is not None else {0, 1, 2}
        members = [c.nodes for c in cells.cells if c.rank in keep]
    else:
        members = [tuple(c) for c in cells]
    rows, cols = [], []
    for j, cell in enumerate(members):
        for v in cell:
            if not 0 <= v < num_nodes:
                raise StructureError(f"cell {j} {list(cell)} references node {v} outside [0, {num_nodes})")
            rows.append(v)
            cols.append(j)
    return SparseMatrix.from_entries(rows, cols, np.ones(len(rows)), (num_nodes, len(members)))


def node_degrees(g: Graph) -> np.ndarray:
    deg = np.zeros(g.num_nodes, dtype=np.int64)
    if g.num_edges:
        np.add.at(deg, g.edges[:, 0], 1)
        np.add.at(deg, g.edges[:, 1], 1)
    return deg


def hyperedge_degrees(h: HyperedgeSet) -> np.ndarray:
    return np.array([len(e) for e in h], dtype=np.int64)
