"""Finite-difference checks for every op, every layer and the full pipeline."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import GradCheckReport, Tensor, gradient_check
from .construct import build_combinatorial_complex, clique_hyperedges
from .graph import Graph, SparseMatrix, build_adjacency, incidence_matrix, mean_adjacency, normalize_adjacency_sym
from .models import GraphOperators, build_model, gcn_forward, hyperconv_forward, sage_forward


def _param(rng, shape, name):
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _fixture_graph(rng) -> Graph:
    # two triangles joined by a bridge, plus a pendant and an isolated node
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3), (5, 6)]
    return Graph(8, edges, node_features=rng.standard_normal((8, 4)), labels=np.array([0, 0, 0, 1, 1, 1, 2, 2]))


def _weighted_sum(out: Tensor, probe: np.ndarray) -> Tensor:
    # fixed random projection to a scalar, so every output entry matters
    return ad.sum(ad.matmul(out, Tensor(probe)))


def gradcheck_cases(seed: int = 0, hidden: int = 64) -> dict[str, tuple[Callable[[], Tensor], list[Tensor]]]:
    """Named ``(forward, params)`` pairs covering the whole op set."""
    rng = np.random.default_rng(seed)
    g = _fixture_graph(rng)
    x_val = g.node_features
    cc = build_combinatorial_complex(g, clique_hyperedges(g))
    adj = build_adjacency(g)
    norm_adj = normalize_adjacency_sym(adj)
    mean_adj = mean_adjacency(adj)
    h = incidence_matrix(cc, g.num_nodes, ranks=(2,))
    sparse = SparseMatrix.from_dense(np.where(rng.random((6, 8)) < 0.4, rng.standard_normal((6, 8)), 0.0))
    labels = g.labels
    mask = np.array([0, 1, 3, 4, 6])
    cases: dict[str, tuple[Callable[[], Tensor], list[Tensor]]] = {}

    a = _param(rng, (5, 4), "a")
    b = _param(rng, (4, 3), "b")
    probe3 = rng.standard_normal((3, 1))
    cases["matmul"] = (lambda: _weighted_sum(ad.matmul(a, b), probe3), [a, b])

    d = _param(rng, (8, 3), "d")
    cases["spmm"] = (lambda: _weighted_sum(ad.spmm(sparse, d), probe3), [d])

    p, q = _param(rng, (8, 3), "p"), _param(rng, (8, 3), "q")
    bias = _param(rng, (1, 3), "bias")
    cases["add"] = (lambda: _weighted_sum(ad.add(p, q), probe3), [p, q])
    cases["add_bias"] = (lambda: _weighted_sum(ad.add_bias(p, bias), probe3), [p, bias])
    cases["relu"] = (lambda: _weighted_sum(ad.relu(p), probe3), [p])

    probe6 = rng.standard_normal((6, 1))
    cases["concat_cols"] = (lambda: _weighted_sum(ad.concat_cols(p, q), probe6), [p, q])
    cases["dropout"] = (
        lambda: _weighted_sum(ad.dropout(p, 0.5, True, np.random.default_rng(7)), probe3),
        [p],
    )
    cases["log_softmax+nll_loss"] = (lambda: ad.nll_loss(ad.log_softmax(p), labels, mask), [p])
    targets = rng.standard_normal((8, 3))
    cases["mse_loss"] = (lambda: ad.mse_loss(p, targets, mask), [p])

    x = Tensor(x_val)
    w = _param(rng, (4, 3), "w")
    w2 = _param(rng, (4, 3), "w_neigh")
    cases["gcn_layer"] = (lambda: _weighted_sum(gcn_forward(norm_adj, x, w), probe3), [w])
    cases["sage_layer"] = (lambda: _weighted_sum(sage_forward(mean_adj, x, w, w2), probe3), [w, w2])
    cases["hyperconv_layer"] = (lambda: _weighted_sum(hyperconv_forward(h, x, w), probe3), [w])

    # Inputs (not just weights) also get checked through the layers.
    xp = _param(rng, (8, 4), "x")
    cases["gcn_layer_input"] = (lambda: _weighted_sum(gcn_forward(norm_adj, xp, w), probe3), [xp])
    cases["hyperconv_layer_input"] = (lambda: _weighted_sum(hyperconv_forward(h, xp, w), probe3), [xp])

    ops = GraphOperators.build(g, cc)
    for backbone in ("gcn", "sage_mean"):
        for phase in ("embedding", "input"):
            model = build_model(
                backbone, 4, 3, hidden=hidden, dropout=0.5, topoaug=True, phase=phase, rng=np.random.default_rng(seed + 1)
            )

            def forward(model=model):
                return ad.nll_loss(ad.log_softmax(model.forward(ops, x, training=False)), labels, mask)

            _nudge_biases(model, rng, forward)

            cases[f"pipeline[{backbone}+topoaug,{phase}]"] = (forward, model.parameters())

    plain = build_model("gcn", 4, 3, hidden=hidden, topoaug=False, rng=np.random.default_rng(seed + 2))

    def plain_forward():
        return ad.nll_loss(ad.log_softmax(plain.forward(ops, x, training=False)), labels, mask)

    _nudge_biases(plain, rng, plain_forward)
    cases["pipeline[gcn]"] = (plain_forward, plain.parameters())
    return cases


# central differences with step 1e-5 move a pre-activation by well under this
KINK_MARGIN = 1e-4


def min_relu_margin(forward: Callable[[], Tensor]) -> float:
    """Smallest ``|z|`` over every ReLU input seen during one forward pass."""
    seen: list[float] = []
    original = ad.relu

    def recording(t: Tensor) -> Tensor:
        if t.value.size:
            seen.append(float(np.abs(t.value).min()))
        return original(t)

    ad.relu = recording
    try:
        forward()
    finally:
        ad.relu = original
    return min(seen, default=np.inf)


def _nudge_biases(model, rng, forward, margin: float = KINK_MARGIN, attempts: int = 1000) -> None:
    # Zero biases leave isolated nodes with exactly-zero pre-activations, i.e.
    # on the ReLU kink. Small random biases move them off it; redraw until
    # every ReLU input clears the margin so central differences stay on one side.
    biases = [p for p in model.parameters() if p.name and p.name.endswith("bias")]
    for _ in range(attempts):
        for prm in biases:
            prm.value = 0.5 * rng.standard_normal(prm.shape)
        if min_relu_margin(forward) > margin:
            return
    raise RuntimeError(f"could not move ReLU inputs at least {margin} away from zero")


def run_gradcheck_suite(tolerance: float = 1e-4, step: float = 1e-5, seed: int = 0, hidden: int = 64) -> dict[str, GradCheckReport]:
    return {
        name: gradient_check(fwd, params, tolerance=tolerance, step=step)
        for name, (fwd, params) in gradcheck_cases(seed, hidden).items()
    }
