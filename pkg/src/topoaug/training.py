"""Transductive node-prediction protocol: splits, training loop, metrics, aggregation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from . import autodiff as ad
from .augment import drop_edge, drop_node, mask_node_features
from .autodiff import AdamState, CosineSchedule, Tape, Tensor, adam_step, cosine_lr
from .graph import CombinatorialComplex, Graph, SparseMatrix
from .models import GraphOperators, TopoAugModel, build_model

Task = Literal["classification", "regression"]
AUGMENTATIONS = ("none", "topoaug", "drop_edge", "drop_node", "feature_mask")

# Distinct seed streams so that consumers sharing one seed never draw
# identical permutations.
_SPLIT_STREAM = 1
_RUN_STREAM = 2


class TrainingError(RuntimeError):
    """Raised when training diverges."""


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def split_nodes(num_nodes: int, seed: int, ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)) -> SplitMasks:
    """Seeded random 6:2:2 split; validation and test sizes are floored, train takes the remainder."""
    if num_nodes < 5:
        raise ValueError(f"need at least 5 nodes to split, got {num_nodes}")
    perm = np.random.default_rng([seed, _SPLIT_STREAM]).permutation(num_nodes)
    n_val = int(math.floor(num_nodes * ratios[1] + 1e-9))
    n_test = int(math.floor(num_nodes * ratios[2] + 1e-9))
    n_train = num_nodes - n_val - n_test
    return SplitMasks(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train : n_train + n_val]),
        np.sort(perm[n_train + n_val :]),
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 0.001
    dropout: float = 0.5
    hidden_dim: int = 64
    seed: int = 0
    task: Task = "classification"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class Variant:
    """Which model and augmentation one experiment arm uses."""

    backbone: str = "gcn"
    augmentation: str = "topoaug"
    aug_p: float = 0.2
    phase: str = "embedding"
    include_edges: bool = False

    def __post_init__(self):
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"unknown augmentation {self.augmentation!r}; expected one of {AUGMENTATIONS}")

    @property
    def label(self) -> str:
        if self.augmentation == "none":
            return self.backbone
        return f"{self.backbone}+{self.augmentation}"


@dataclass
class MetricsRecord:
    seed: int
    metric: str
    train_loss: list[float]
    val: float
    test: float
    best_val: float
    test_at_best_val: float
    best_epoch: int
    seconds: float = 0.0
    variant: str = ""

    def __post_init__(self):
        if self.metric == "accuracy":
            for name in ("val", "test", "best_val", "test_at_best_val"):
                value = getattr(self, name)
                if not 0.0 <= value <= 100.0:
                    raise ValueError(f"{name} accuracy {value} outside [0, 100]")

    def without_timing(self) -> "MetricsRecord":
        return replace(self, seconds=0.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NodeDataset:
    """Everything one training run needs, already in memory."""

    graph: Graph
    features: np.ndarray
    targets: np.ndarray
    task: Task = "classification"
    complex: CombinatorialComplex | None = None

    @property
    def out_dim(self) -> int:
        if self.task == "classification":
            return int(np.max(self.targets)) + 1
        return 1 if self.targets.ndim == 1 else self.targets.shape[1]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _rows(mask) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise ValueError("metric mask selects no rows")
    return idx.astype(np.int64)


def accuracy(log_probs: Tensor | np.ndarray, labels, mask) -> float:
    """Percentage of masked rows whose argmax matches the label."""
    scores = log_probs.value if isinstance(log_probs, Tensor) else np.asarray(log_probs)
    idx = _rows(mask)
    pred = scores[idx].argmax(axis=1)
    return 100.0 * float(np.mean(pred == np.asarray(labels)[idx]))


def mse(pred: Tensor | np.ndarray, targets, mask) -> float:
    values = pred.value if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    idx = _rows(mask)
    t = np.asarray(targets, dtype=np.float64).reshape(values.shape[0], -1)
    return float(np.mean((values[idx] - t[idx]) ** 2))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _loss(task: Task, out: Tensor, targets, rows) -> Tensor:
    if task == "classification":
        return ad.nll_loss(ad.log_softmax(out), targets, rows)
    return ad.mse_loss(out, targets, rows)


def _metric(task: Task, out: Tensor, targets, rows) -> float:
    if task == "classification":
        return accuracy(out, targets, rows)
    return mse(out, targets, rows)


def train(
    model: TopoAugModel,
    data: NodeDataset,
    cfg: TrainConfig,
    masks: SplitMasks,
    *,
    augmentation: str = "none",
    aug_p: float = 0.2,
    include_edges: bool = False,
    rng: np.random.Generator | None = None,
) -> MetricsRecord:
    """Full-batch training for ``cfg.epochs`` epochs with Adam and a per-epoch cosine schedule.

    Reported ``val``/``test`` come from the final epoch; the best-validation
    epoch and its test score are logged alongside. Perturbation
    augmentations are resampled every epoch and only affect training
    forwards.
    """
    if augmentation not in AUGMENTATIONS:
        raise ValueError(f"unknown augmentation {augmentation!r}")
    if model.has_aux and data.complex is None:
        raise ValueError("a model with an auxiliary stack needs data.complex")
    if cfg.task != data.task:
        raise ValueError(f"config task {cfg.task!r} does not match dataset task {data.task!r}")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    drop_rng, aug_rng = rng.spawn(2)

    start = time.perf_counter()
    task = cfg.task
    targets = data.targets
    ops = GraphOperators.build(data.graph, data.complex, include_edges=include_edges)
    x_full = Tensor(data.features)
    params = model.parameters()
    state = AdamState(params)
    sched = CosineSchedule(cfg.lr, cfg.epochs)
    higher_better = task == "classification"

    is_train = np.zeros(data.graph.num_nodes, dtype=bool)
    is_train[masks.train] = True

    losses: list[float] = []
    best_val, best_test, best_epoch = (-math.inf if higher_better else math.inf), math.nan, -1
    for epoch in range(cfg.epochs):
        lr = cosine_lr(sched, epoch)
        ep_ops, x, ep_targets, rows = ops, x_full, targets, masks.train
        if augmentation == "drop_edge":
            ep_ops = GraphOperators.build_with_incidence(drop_edge(data.graph, aug_p, aug_rng), ops.incidence)
        elif augmentation == "feature_mask":
            x = mask_node_features(data.features, aug_p, aug_rng)
        elif augmentation == "drop_node":
            sub, kept = drop_node(data.graph, aug_p, aug_rng)
            sub_rows = np.flatnonzero(is_train[kept])
            if sub_rows.size:  # otherwise keep the full graph this epoch
                ep_ops = GraphOperators.build_with_incidence(sub, SparseMatrix(ops.incidence.csr[kept]))
                x = Tensor(data.features[kept])
                ep_targets, rows = targets[kept], sub_rows

        for p in params:
            p.zero_grad()
        with Tape() as tape:
            out = model.forward(ep_ops, x, training=True, rng=drop_rng)
            loss = _loss(task, out, ep_targets, rows)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"non-finite training loss {value} at epoch {epoch}")
        tape.backward(loss)
        adam_step(state, lr)
        losses.append(value)

        out_eval = model.forward(ops, x_full, training=False)
        val = _metric(task, out_eval, targets, masks.val)
        if (val > best_val) if higher_better else (val < best_val):
            best_val, best_epoch = val, epoch
            best_test = _metric(task, out_eval, targets, masks.test)

    out_eval = model.forward(ops, x_full, training=False)
    return MetricsRecord(
        seed=cfg.seed,
        metric="accuracy" if higher_better else "mse",
        train_loss=losses,
        val=_metric(task, out_eval, targets, masks.val),
        test=_metric(task, out_eval, targets, masks.test),
        best_val=float(best_val),
        test_at_best_val=float(best_test),
        best_epoch=best_epoch,
        seconds=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    variant: str
    records: list[MetricsRecord] = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        return aggregate(self.records)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation; std is 0.0 for a single value."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no values to aggregate")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def aggregate(records: Sequence[MetricsRecord]) -> dict:
    if not records:
        raise ValueError("no metrics records to aggregate")
    out = {"metric": records[0].metric, "runs": len(records)}
    for key in ("val", "test", "best_val", "test_at_best_val"):
        m, s = mean_std([getattr(r, key) for r in records])
        out[f"{key}_mean"], out[f"{key}_std"] = m, s
    return out


def fit(data: NodeDataset, variant: Variant, cfg: TrainConfig) -> tuple[TopoAugModel, MetricsRecord]:
    """One seeded run: split, initialize, train. Returns the trained model too."""
    masks = split_nodes(data.graph.num_nodes, cfg.seed)
    init_rng, train_rng = np.random.default_rng([cfg.seed, _RUN_STREAM]).spawn(2)
    model = build_model(
        variant.backbone,
        data.features.shape[1],
        data.out_dim,
        hidden=cfg.hidden_dim,
        dropout=cfg.dropout,
        topoaug=variant.augmentation == "topoaug",
        phase=variant.phase,
        rng=init_rng,
    )
    rec = train(
        model,
        data,
        cfg,
        masks,
        augmentation=variant.augmentation,
        aug_p=variant.aug_p,
        include_edges=variant.include_edges,
        rng=train_rng,
    )
    rec.variant = variant.label
    return model, rec


def run_single(data: NodeDataset, variant: Variant, cfg: TrainConfig) -> MetricsRecord:
    return fit(data, variant, cfg)[1]


def evaluate(model: TopoAugModel, data: NodeDataset, masks: SplitMasks, *, include_edges: bool = False) -> dict:
    """Validation and test metric of ``model`` in evaluation mode."""
    ops = GraphOperators.build(data.graph, data.complex, include_edges=include_edges)
    out = model.forward(ops, Tensor(data.features), training=False)
    return {
        "metric": "accuracy" if data.task == "classification" else "mse",
        "val": _metric(data.task, out, data.targets, masks.val),
        "test": _metric(data.task, out, data.targets, masks.test),
    }


def _run_star(args):
    return run_single(*args)


def run_experiment(
    data: NodeDataset,
    variant: Variant,
    cfg: TrainConfig,
    seeds: Sequence[int],
    *,
    workers: int = 1,
) -> ExperimentResult:
    """Run ``variant`` once per seed; ``workers > 1`` fans seeds out over processes."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seed list is empty")
    jobs = [(data, variant, replace(cfg, seed=int(s))) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_star, jobs))
    else:
        records = [_run_star(j) for j in jobs]
    return ExperimentResult(variant.label, records)
