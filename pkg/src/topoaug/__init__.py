"""Combinatorial complexes from simple graphs, and GNNs augmented with hypergraph features."""

from .augment import drop_edge, drop_node, mask_node_features
from .autodiff import (
    AdamState,
    CosineSchedule,
    GradCheckReport,
    ShapeError,
    Tape,
    Tensor,
    adam_step,
    cosine_lr,
    gradient_check,
)
from .construct import (
    CliqueConfig,
    ThresholdConfig,
    UnionFind,
    WindowConfig,
    build_combinatorial_complex,
    clique_hyperedges,
    complex_statistics,
    filter_by_size,
    maximal_cliques,
    threshold_hyperedges,
    window_hyperedges,
)
from .graph import (
    Cell,
    CombinatorialComplex,
    Graph,
    HyperedgeSet,
    SparseMatrix,
    StructureError,
    ValidationReport,
    build_adjacency,
    hyperedge_degrees,
    incidence_matrix,
    mean_adjacency,
    node_degrees,
    normalize_adjacency_sym,
    validate_complex,
)
from .io import DatasetError, ExperimentConfig, load_dataset, save_complex, save_metrics
from .models import GraphOperators, TopoAugModel, build_model, topoaug_forward
from .synthetic import make_planted_benchmark
from .training import (
    MetricsRecord,
    NodeDataset,
    TrainConfig,
    TrainingError,
    Variant,
    evaluate,
    fit,
    run_experiment,
    split_nodes,
    train,
)
from .wl import wl_distinguishes, wl_refinement

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
