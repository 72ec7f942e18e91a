"""GCN, GraphSAGE-mean and HyperConv layers and the TopoAug fusion model.

A :class:`TopoAugModel` runs two stacks side by side. The embedding
stack (GCN / SAGE / HyperConv) sees the original graph. The auxiliary
stack (HyperConv) sees the rank-2 cells of the combinatorial complex.
Their outputs are concatenated column-wise and multiplied by a single
output weight ``W``::

    out = (f_emb(G, X) || f_aux(CC, X)) W + b

With an empty auxiliary stack the model is the plain backbone followed
by the same output layer, which is what the baselines use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graph import (
    CombinatorialComplex,
    Graph,
    SparseMatrix,
    build_adjacency,
    incidence_matrix,
    mean_adjacency,
    normalize_adjacency_sym,
)

LayerKind = Literal["gcn", "sage_mean", "hyperconv"]
KINDS = ("gcn", "sage_mean", "hyperconv")


# ---------------------------------------------------------------------------
# Structural operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperConvOperator:
    """The two normalized halves of HyperConv message passing.

    ``node_to_edge = D_e^-1 H^T`` averages member features into a hyperedge
    embedding; ``edge_to_node = D_v^-1 H`` averages hyperedge embeddings
    back onto their members. Nodes in no hyperedge get zero rows.
    """

    node_to_edge: SparseMatrix
    edge_to_node: SparseMatrix

    @classmethod
    def from_incidence(cls, h: SparseMatrix) -> "HyperConvOperator":
        d_e = h.col_sums()
        d_v = h.row_sums()
        inv_e = np.divide(1.0, d_e, out=np.zeros_like(d_e), where=d_e > 0)
        inv_v = np.divide(1.0, d_v, out=np.zeros_like(d_v), where=d_v > 0)
        return cls(h.transpose().scale_rows(inv_e), h.scale_rows(inv_v))


@dataclass(frozen=True)
class GraphOperators:
    """Precomputed propagation matrices for one graph (and its complex)."""

    num_nodes: int
    norm_adj: SparseMatrix
    mean_adj: SparseMatrix
    incidence: SparseMatrix
    hyper: HyperConvOperator

    @classmethod
    def build(
        cls,
        g: Graph,
        cc: CombinatorialComplex | None = None,
        *,
        include_edges: bool = False,
    ) -> "GraphOperators":
        """Operators for ``g``; HyperConv uses the rank-2 cells of ``cc``.

        ``include_edges`` also feeds rank-1 cells to HyperConv (ablation).
        """
        ranks = (1, 2) if include_edges else (2,)
        if cc is None:
            h = incidence_matrix([], g.num_nodes)
        else:
            h = incidence_matrix(cc, g.num_nodes, ranks=ranks)
        return cls.build_with_incidence(g, h)

    @classmethod
    def build_with_incidence(cls, g: Graph, h: SparseMatrix) -> "GraphOperators":
        """Operators for ``g`` with an explicit node-by-hyperedge incidence."""
        if h.shape[0] != g.num_nodes:
            raise ShapeError(f"incidence has {h.shape[0]} rows for {g.num_nodes} nodes")
        adj = build_adjacency(g)
        return cls(
            g.num_nodes,
            normalize_adjacency_sym(adj),
            mean_adjacency(adj),
            h,
            HyperConvOperator.from_incidence(h),
        )


# ---------------------------------------------------------------------------
# Functional layers
# ---------------------------------------------------------------------------


def gcn_forward(norm_adj: SparseMatrix, x: Tensor, weight: Tensor) -> Tensor:
    """``norm_adj @ x @ weight``."""
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"gcn input {x.shape} does not match weight {weight.shape}")
    return ad.spmm(norm_adj, ad.matmul(x, weight))


def sage_forward(g: Graph | SparseMatrix, x: Tensor, w_self: Tensor, w_neigh: Tensor) -> Tensor:
    """``x_v W_self + mean_{u in N(v)} x_u W_neigh``; isolated nodes get no neighbour term.

    ``g`` may be a graph or an already row-normalized adjacency.
    """
    mean_adj = g if isinstance(g, SparseMatrix) else mean_adjacency(build_adjacency(g))
    if x.shape[1] != w_self.shape[0] or w_self.shape != w_neigh.shape:
        raise ShapeError(f"sage input {x.shape} with weights {w_self.shape}/{w_neigh.shape}")
    return ad.add(ad.matmul(x, w_self), ad.spmm(mean_adj, ad.matmul(x, w_neigh)))


def hyperconv_forward(h: SparseMatrix | HyperConvOperator, x: Tensor, weight: Tensor) -> Tensor:
    """Two-step mean aggregation ``D_v^-1 H (D_e^-1 H^T x) W``."""
    op = h if isinstance(h, HyperConvOperator) else HyperConvOperator.from_incidence(h)
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"hyperconv input {x.shape} does not match weight {weight.shape}")
    edge_emb = ad.spmm(op.node_to_edge, x)
    return ad.matmul(ad.spmm(op.edge_to_node, edge_emb), weight)


# ---------------------------------------------------------------------------
# Parameterized layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_dim: int
    out_dim: int
    activation: Literal["relu", "none"] = "relu"
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected one of {KINDS}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim} -> {self.out_dim}")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros_param(shape, name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


class Layer:
    """One message-passing layer: propagate, add bias, activate, dropout."""

    def __init__(self, spec: LayerSpec, rng: np.random.Generator, *, bias: bool = True, prefix: str = ""):
        self.spec = spec
        self.weight = glorot(rng, spec.in_dim, spec.out_dim, f"{prefix}weight")
        self.w_neigh = glorot(rng, spec.in_dim, spec.out_dim, f"{prefix}w_neigh") if spec.kind == "sage_mean" else None
        self.bias = zeros_param((1, spec.out_dim), f"{prefix}bias") if bias else None

    def parameters(self) -> list[Tensor]:
        return [p for p in (self.weight, self.w_neigh, self.bias) if p is not None]

    def __call__(self, ops: GraphOperators, x: Tensor, *, training: bool = False, rng=None) -> Tensor:
        kind = self.spec.kind
        if kind == "gcn":
            h = gcn_forward(ops.norm_adj, x, self.weight)
        elif kind == "sage_mean":
            h = sage_forward(ops.mean_adj, x, self.weight, self.w_neigh)
        else:
            h = hyperconv_forward(ops.hyper, x, self.weight)
        if self.bias is not None:
            h = ad.add_bias(h, self.bias)
        if self.spec.activation == "relu":
            h = ad.relu(h)
        return ad.dropout(h, self.spec.dropout_p, training, rng)


def make_stack(kind: LayerKind, in_dim: int, hidden: int = 64, dropout: float = 0.5, depth: int = 2) -> list[LayerSpec]:
    """``depth`` layers of ``kind`` with ReLU throughout and dropout after the first."""
    specs = []
    for i in range(depth):
        specs.append(LayerSpec(kind, in_dim if i == 0 else hidden, hidden, "relu", dropout if i == 0 else 0.0))
    return specs


# ---------------------------------------------------------------------------
# TopoAug
# ---------------------------------------------------------------------------


class TopoAugModel:
    """Backbone stack plus optional auxiliary HyperConv stack, fused by one output layer.

    Parameters
    ----------
    emb_layers : list of LayerSpec
        The embedding stack ``f_emb``, run on the original graph.
    aux_layers : list of LayerSpec
        The auxiliary stack ``f_aux``, run on the complex. Empty for a
        plain baseline.
    out_dim : int
        Width of the output layer (classes, or regression targets).
    phase : {"embedding", "input"}, default = "embedding"
        ``"embedding"`` concatenates the two stacks' outputs before the
        output layer. ``"input"`` concatenates the auxiliary output with
        the raw node features and feeds that through a linear layer into
        ``f_emb``; the output layer then only sees ``f_emb``.
    in_dim : int, optional
        Raw node-feature width; required for ``phase="input"``.
    bias : bool, default = True
        Whether layers (including the output layer) carry a bias.
    rng : numpy.random.Generator
        Source for Glorot initialization.
    """

    def __init__(
        self,
        emb_layers: Sequence[LayerSpec],
        aux_layers: Sequence[LayerSpec],
        out_dim: int,
        *,
        phase: Literal["embedding", "input"] = "embedding",
        in_dim: int | None = None,
        bias: bool = True,
        rng: np.random.Generator,
    ):
        if not emb_layers:
            raise ValueError("the embedding stack needs at least one layer")
        if phase not in ("embedding", "input"):
            raise ValueError(f"unknown fusion phase {phase!r}")
        _check_chain(emb_layers, "emb")
        _check_chain(aux_layers, "aux")
        self.emb_specs = list(emb_layers)
        self.aux_specs = list(aux_layers)
        self.phase = phase
        self.out_dim = int(out_dim)

        self.emb = [Layer(s, rng, bias=bias, prefix=f"emb{i}.") for i, s in enumerate(self.emb_specs)]
        self.aux = [Layer(s, rng, bias=bias, prefix=f"aux{i}.") for i, s in enumerate(self.aux_specs)]
        d_z = self.emb_specs[-1].out_dim
        d_aux = self.aux_specs[-1].out_dim if self.aux_specs else 0

        self.input_proj = None
        self.input_bias = None
        if phase == "input" and self.aux_specs:
            if in_dim is None:
                raise ValueError("phase='input' needs in_dim (raw node feature width)")
            proj_out = self.emb_specs[0].in_dim
            self.input_proj = glorot(rng, in_dim + d_aux, proj_out, "input_proj.weight")
            self.input_bias = zeros_param((1, proj_out), "input_proj.bias") if bias else None
            fused = d_z
        else:
            fused = d_z + d_aux
        self.fusion_weight = glorot(rng, fused, self.out_dim, "out.weight")
        self.fusion_bias = zeros_param((1, self.out_dim), "out.bias") if bias else None

    @property
    def has_aux(self) -> bool:
        return bool(self.aux)

    def parameters(self) -> list[Tensor]:
        params = []
        for layer in self.emb + self.aux:
            params.extend(layer.parameters())
        for p in (self.input_proj, self.input_bias, self.fusion_weight, self.fusion_bias):
            if p is not None:
                params.append(p)
        return params

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            if p.name not in state:
                raise KeyError(f"missing parameter {p.name!r}")
            value = np.asarray(state[p.name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"parameter {p.name!r} expects {p.shape}, got {value.shape}")
            p.value = value.copy()

    def _run(self, layers, ops, x, training, rng):
        for layer in layers:
            x = layer(ops, x, training=training, rng=rng)
        return x

    def auxiliary_features(self, ops: GraphOperators, x: Tensor, *, training: bool = False, rng=None) -> Tensor:
        return self._run(self.aux, ops, x, training, rng)

    def embed(self, ops: GraphOperators, x: Tensor, *, training: bool = False, rng=None) -> Tensor:
        return self._run(self.emb, ops, x, training, rng)

    def fuse(self, z: Tensor, z_aux: Tensor | None) -> Tensor:
        h = z if z_aux is None else ad.concat_cols(z, z_aux)
        if h.shape[1] != self.fusion_weight.shape[0]:
            raise ShapeError(f"fused width {h.shape[1]} does not match output weight rows {self.fusion_weight.shape[0]}")
        out = ad.matmul(h, self.fusion_weight)
        if self.fusion_bias is not None:
            out = ad.add_bias(out, self.fusion_bias)
        return out

    def forward(
        self,
        ops: GraphOperators,
        x: Tensor,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
        aux_ops: GraphOperators | None = None,
    ) -> Tensor:
        """Output scores (no softmax). ``aux_ops`` defaults to ``ops``."""
        aux_ops = aux_ops or ops
        if not self.aux:
            return self.fuse(self.embed(ops, x, training=training, rng=rng), None)
        z_aux = self.auxiliary_features(aux_ops, x, training=training, rng=rng)
        if self.phase == "embedding":
            z = self.embed(ops, x, training=training, rng=rng)
            return self.fuse(z, z_aux)
        h = ad.matmul(ad.concat_cols(x, z_aux), self.input_proj)
        if self.input_bias is not None:
            h = ad.add_bias(h, self.input_bias)
        return self.fuse(self.embed(ops, h, training=training, rng=rng), None)

    __call__ = forward


def _check_chain(specs: Sequence[LayerSpec], label: str) -> None:
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"{label} stack: layer output {a.out_dim} does not feed next input {b.in_dim}")


def build_model(
    backbone: LayerKind,
    in_dim: int,
    out_dim: int,
    *,
    hidden: int = 64,
    dropout: float = 0.5,
    topoaug: bool = True,
    aux_kind: LayerKind = "hyperconv",
    phase: Literal["embedding", "input"] = "embedding",
    depth: int = 2,
    rng: np.random.Generator,
) -> TopoAugModel:
    """Standard two-layer backbone, optionally augmented with a HyperConv auxiliary stack."""
    aux = make_stack(aux_kind, in_dim, hidden, dropout, depth) if topoaug else []
    emb_in = hidden if (topoaug and phase == "input") else in_dim
    emb = make_stack(backbone, emb_in, hidden, dropout, depth)
    return TopoAugModel(emb, aux, out_dim, phase=phase, in_dim=in_dim, rng=rng)


def topoaug_forward(
    model: TopoAugModel,
    g: Graph,
    cc: CombinatorialComplex,
    x: Tensor,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Convenience wrapper: build operators for ``(g, cc)`` and run ``model``."""
    return model.forward(GraphOperators.build(g, cc), x, training=training, rng=rng)
