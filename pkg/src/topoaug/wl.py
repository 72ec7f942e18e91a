"""1-WL colour refinement, optionally aware of hyperedge co-membership.

Colours are SHA-256 digests of a canonical text serialization, so
histograms are stable across runs and comparable across graphs.
"""

from __future__ import annotations

import hashlib
from collections import Counter

from .graph import Graph, HyperedgeSet

INITIAL_COLOR = "0"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def wl_refinement(
    g: Graph,
    extra_cells: HyperedgeSet | None = None,
    rounds: int = 3,
) -> tuple[tuple[str, int], ...]:
    """Refine node colours for ``rounds`` iterations and return the colour histogram.

    Each round a node's new colour is the digest of its own colour, the
    sorted multiset of its neighbours' colours and, when ``extra_cells`` is
    given, one sorted multiset of co-member colours per hyperedge it
    belongs to. Exactly ``rounds`` iterations run (no early stop) so two
    graphs refined with the same ``rounds`` are directly comparable.

    Returns
    -------
    tuple of (colour, count)
        Sorted by colour.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    nbrs = g.neighbors()
    memberships: list[list[tuple[int, ...]]] = [[] for _ in range(g.num_nodes)]
    if extra_cells is not None:
        extra_cells.check_members(g.num_nodes)
        for he in extra_cells:
            for v in he:
                memberships[v].append(he)

    colors = [INITIAL_COLOR] * g.num_nodes
    for _ in range(rounds):
        new = []
        for v in range(g.num_nodes):
            neigh = ",".join(sorted(colors[u] for u in nbrs[v]))
            parts = [colors[v], f"N[{neigh}]"]
            if extra_cells is not None:
                groups = sorted(
                    "(" + ",".join(sorted(colors[u] for u in he if u != v)) + ")" for he in memberships[v]
                )
                parts.append("H[" + ";".join(groups) + "]")
            new.append(_digest("|".join(parts)))
        colors = new
    return tuple(sorted(Counter(colors).items()))


def wl_distinguishes(
    g1: Graph,
    g2: Graph,
    cells1: HyperedgeSet | None = None,
    cells2: HyperedgeSet | None = None,
    rounds: int | None = None,
) -> bool:
    """True when the refined histograms differ. ``rounds`` defaults to the larger node count."""
    if (cells1 is None) != (cells2 is None):
        raise ValueError("pass hyperedges for both graphs or for neither")
    r = rounds if rounds is not None else max(g1.num_nodes, g2.num_nodes, 1)
    return wl_refinement(g1, cells1, r) != wl_refinement(g2, cells2, r)
