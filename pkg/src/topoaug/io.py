"""JSON dataset, complex, metrics and experiment-config formats.

Dataset files (``schema_version`` 1) look like::

    {
      "schema_version": 1,
      "num_nodes": 4,
      "edges": [[0, 1], [1, 2]],
      "node_features": [[...], ...],        # optional, num_nodes rows
      "edge_features": [[...], ...],        # optional, one row per edge
      "labels": [0, 1, 1, 0],               # optional, ints or reals
      "task": "classification",             # optional; or "regression"
      "positions": [0, 1200, ...],          # optional, for the window strategy
      "partitions": ["chr1", "chr1", ...],  # optional, for the window strategy
      "embeddings": [[...], ...],           # optional, for the threshold strategy
      "hyperedges": [[0, 1, 2], ...]        # optional, pre-extracted
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from .construct import (
    DEFAULT_MIN_SIZE,
    DEFAULT_WINDOW,
    CliqueConfig,
    ThresholdConfig,
    WindowConfig,
    build_combinatorial_complex,
    clique_hyperedges,
    filter_by_size,
    threshold_hyperedges,
    window_hyperedges,
)
from .graph import Cell, CombinatorialComplex, Graph, HyperedgeSet, StructureError
from .training import AUGMENTATIONS, MetricsRecord, NodeDataset, TrainConfig, Variant, aggregate

SCHEMA_VERSION = 1
STRATEGIES = ("cliques", "window", "threshold", "provided")
BACKBONES = {"gcn": "gcn", "sage": "sage_mean", "sage_mean": "sage_mean", "graphsage": "sage_mean", "hyperconv": "hyperconv"}


class DatasetError(ValueError):
    """Raised for unreadable or invalid input files."""


_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

DATASET_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "num_nodes", "edges"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "num_nodes": {"type": "integer", "minimum": 0},
        "edges": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
        "node_features": _MATRIX,
        "edge_features": _MATRIX,
        "labels": {"type": "array"},
        "task": {"enum": ["classification", "regression"]},
        "positions": {"type": "array", "items": {"type": "integer"}},
        "partitions": {"type": "array", "items": {"type": ["string", "integer"]}},
        "embeddings": _MATRIX,
        "hyperedges": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
    },
}


@dataclass(frozen=True)
class LoadedDataset:
    graph: Graph
    task: str = "classification"
    positions: list[int] | None = None
    partitions: list | None = None
    embeddings: np.ndarray | None = None
    hyperedges: HyperedgeSet | None = None

    def node_dataset(self, cc: CombinatorialComplex | None = None) -> NodeDataset:
        g = self.graph
        if g.labels is None:
            raise DatasetError("dataset has no labels; training needs them")
        if g.node_features is None:
            features = np.eye(g.num_nodes)
        else:
            features = g.node_features
        if self.task == "classification":
            targets = np.asarray(g.labels, dtype=np.int64)
        else:
            targets = np.asarray(g.labels, dtype=np.float64)
        return NodeDataset(g, features, targets, self.task, cc)


def _read_json(path: str | os.PathLike) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_dataset(doc: Any, source: str = "<dataset>") -> LoadedDataset:
    """Validate a decoded dataset document and build the in-memory structures."""
    validator = jsonschema.Draft7Validator(DATASET_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise DatasetError(f"{source}: field {_field_path(err)}: {err.message}")

    n = doc["num_nodes"]

    def _len_check(name: str):
        if name in doc and len(doc[name]) != n:
            raise DatasetError(f"{source}: field {name} has {len(doc[name])} entries, expected num_nodes={n}")

    for name in ("node_features", "labels", "positions", "partitions", "embeddings"):
        _len_check(name)
    for name in ("node_features", "edge_features", "embeddings"):
        rows = doc.get(name)
        if rows and len({len(r) for r in rows}) > 1:
            raise DatasetError(f"{source}: field {name} has rows of unequal length")

    try:
        graph = Graph(
            n,
            doc["edges"],
            node_features=doc.get("node_features"),
            edge_features=doc.get("edge_features"),
            labels=doc.get("labels"),
        )
        hyperedges = None
        if "hyperedges" in doc:
            hyperedges = HyperedgeSet(doc["hyperedges"], min_size=1)
            hyperedges.check_members(n)
    except StructureError as exc:
        raise DatasetError(f"{source}: {exc}") from exc

    embeddings = np.asarray(doc["embeddings"], dtype=np.float64) if "embeddings" in doc else None
    return LoadedDataset(
        graph=graph,
        task=doc.get("task", "classification"),
        positions=doc.get("positions"),
        partitions=doc.get("partitions"),
        embeddings=embeddings,
        hyperedges=hyperedges,
    )


def load_dataset(path: str | os.PathLike) -> LoadedDataset:
    return parse_dataset(_read_json(path), str(path))


def dataset_to_dict(ds: LoadedDataset) -> dict:
    g = ds.graph
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "num_nodes": g.num_nodes, "edges": g.edges.tolist()}
    if g.node_features is not None:
        doc["node_features"] = g.node_features.tolist()
    if g.edge_features is not None:
        doc["edge_features"] = g.edge_features.tolist()
    if g.labels is not None:
        doc["labels"] = g.labels.tolist()
    doc["task"] = ds.task
    if ds.positions is not None:
        doc["positions"] = list(ds.positions)
    if ds.partitions is not None:
        doc["partitions"] = list(ds.partitions)
    if ds.embeddings is not None:
        doc["embeddings"] = np.asarray(ds.embeddings).tolist()
    if ds.hyperedges is not None:
        doc["hyperedges"] = [list(e) for e in ds.hyperedges]
    return doc


def save_dataset(ds: LoadedDataset, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds)))


# ---------------------------------------------------------------------------
# Complexes and metrics
# ---------------------------------------------------------------------------


def save_complex(cc: CombinatorialComplex, path: str | os.PathLike) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "num_nodes": cc.num_nodes,
        "cells": [{"nodes": list(c.nodes), "rank": c.rank, "provenance": c.provenance} for c in cc.cells],
    }
    Path(path).write_text(json.dumps(doc))


def load_complex(path: str | os.PathLike) -> CombinatorialComplex:
    doc = _read_json(path)
    try:
        return CombinatorialComplex(
            doc["num_nodes"], [Cell(tuple(c["nodes"]), c["rank"], c["provenance"]) for c in doc["cells"]]
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: malformed complex file ({exc})") from exc
    except StructureError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def metrics_document(records: Sequence[MetricsRecord]) -> dict:
    if not records:
        raise ValueError("refusing to save an empty metrics list")
    return {
        "schema_version": SCHEMA_VERSION,
        "runs": [r.to_dict() for r in records],
        "aggregate": aggregate(records),
    }


def save_metrics(records: Sequence[MetricsRecord], path: str | os.PathLike) -> None:
    doc = metrics_document(records)
    Path(path).write_text(json.dumps(doc, indent=2))


def load_metrics(path: str | os.PathLike) -> dict:
    return _read_json(path)


# ---------------------------------------------------------------------------
# Hyperedge strategies and experiment configs
# ---------------------------------------------------------------------------


def extract_hyperedges(ds: LoadedDataset, strategy: str, params: dict | None = None) -> HyperedgeSet:
    """Run one construction strategy over a loaded dataset."""
    params = dict(params or {})
    min_size = int(params.get("min_size", DEFAULT_MIN_SIZE))
    try:
        if strategy == "cliques":
            return clique_hyperedges(ds.graph, CliqueConfig(min_size))
        if strategy == "window":
            if ds.positions is None:
                raise DatasetError("window strategy needs 'positions' in the dataset")
            cfg = WindowConfig(ds.positions, ds.partitions, int(params.get("window", DEFAULT_WINDOW)), min_size)
            return window_hyperedges(ds.graph, cfg)
        if strategy == "threshold":
            if ds.embeddings is None:
                raise DatasetError("threshold strategy needs 'embeddings' in the dataset")
            if params.get("tau") is None:
                raise DatasetError("threshold strategy needs an explicit tau")
            if len(ds.embeddings) != ds.graph.num_nodes:
                raise DatasetError("embeddings row count does not match num_nodes")
            cfg = ThresholdConfig(ds.embeddings, float(params["tau"]), params.get("metric", "euclidean"), min_size)
            return threshold_hyperedges(cfg)
        if strategy == "provided":
            if ds.hyperedges is None:
                raise DatasetError("provided strategy needs 'hyperedges' in the dataset")
            return filter_by_size(ds.hyperedges, min_size)
    except StructureError as exc:
        raise DatasetError(str(exc)) from exc
    raise DatasetError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def build_complex(ds: LoadedDataset, strategy: str, params: dict | None = None) -> CombinatorialComplex:
    h = extract_hyperedges(ds, strategy, params)
    return build_combinatorial_complex(ds.graph, h, allow_singleton_hyperedges=h.min_size < 2)


@dataclass
class ExperimentConfig:
    dataset: str
    strategy: str = "cliques"
    strategy_params: dict = field(default_factory=dict)
    model: str = "gcn"
    augmentation: str = "topoaug"
    aug_p: float = 0.2
    phase: str = "embedding"
    include_edges: bool = False
    epochs: int = 500
    lr: float = 0.001
    dropout: float = 0.5
    hidden_dim: int = 64
    task: str | None = None
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = 1
    output: str | None = None
    model_state: str | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DatasetError(f"config: unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.model not in BACKBONES:
            raise DatasetError(f"config: unknown model {self.model!r}; expected one of {sorted(BACKBONES)}")
        if self.augmentation not in AUGMENTATIONS:
            raise DatasetError(f"config: unknown augmentation {self.augmentation!r}; expected one of {AUGMENTATIONS}")
        if not self.seeds:
            raise DatasetError("config: seeds must be a non-empty list")
        if self.strategy == "threshold" and "tau" not in self.strategy_params:
            raise DatasetError("config: threshold strategy needs strategy_params.tau")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | os.PathLike | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise DatasetError("config: top level must be an object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise DatasetError(f"config: unknown fields {sorted(unknown)}")
        if "dataset" not in doc:
            raise DatasetError("config: missing required field 'dataset'")
        try:
            cfg = cls(**doc)
        except TypeError as exc:
            raise DatasetError(f"config: {exc}") from exc
        if base_dir is not None:
            for name in ("dataset", "output", "model_state"):
                value = getattr(cfg, name)
                if value is not None and not os.path.isabs(value):
                    setattr(cfg, name, str(Path(base_dir) / value))
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        return cls.from_dict(_read_json(path), Path(path).parent)

    def variant(self) -> Variant:
        return Variant(BACKBONES[self.model], self.augmentation, self.aug_p, self.phase, self.include_edges)

    def train_config(self, task: str) -> TrainConfig:
        return TrainConfig(self.epochs, self.lr, self.dropout, self.hidden_dim, self.seeds[0], task)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Model state
# ---------------------------------------------------------------------------


def save_model_state(path: str | os.PathLike, state: dict[str, np.ndarray], meta: dict) -> None:
    arrays = {f"param:{k}": v for k, v in state.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **arrays)


def load_model_state(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            state = {k[len("param:"):]: z[k] for k in z.files if k.startswith("param:")}
    except (OSError, KeyError, ValueError) as exc:
        raise DatasetError(f"{path}: cannot read model state ({exc})") from exc
    return state, meta
