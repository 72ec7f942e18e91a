import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoaug.construct import build_combinatorial_complex, clique_hyperedges
from topoaug.graph import Graph, HyperedgeSet, validate_complex
from topoaug.io import (
    DatasetError,
    ExperimentConfig,
    LoadedDataset,
    build_complex,
    dataset_to_dict,
    extract_hyperedges,
    load_complex,
    load_dataset,
    load_metrics,
    load_model_state,
    parse_dataset,
    save_complex,
    save_dataset,
    save_metrics,
    save_model_state,
)
from topoaug.synthetic import complete, two_triangles
from topoaug.training import MetricsRecord


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


class TestLoadDataset:
    def test_minimal(self, tmp_path):
        ds = load_dataset(write(tmp_path, "d.json", {"schema_version": 1, "num_nodes": 2, "edges": [[0, 1]]}))
        assert ds.graph.num_nodes == 2 and ds.graph.num_edges == 1

    def test_out_of_range_edge_named(self, tmp_path):
        p = write(tmp_path, "d.json", {"schema_version": 1, "num_nodes": 3, "edges": [[0, 5]]})
        with pytest.raises(DatasetError, match=r"\(0, 5\)"):
            load_dataset(p)

    def test_parse_error_has_line(self, tmp_path):
        p = write(tmp_path, "d.json", '{\n  "schema_version": 1,\n  "num_nodes": 2,,\n}')
        with pytest.raises(DatasetError, match="line 3"):
            load_dataset(p)

    def test_schema_error_has_field(self, tmp_path):
        p = write(tmp_path, "d.json", {"schema_version": 1, "num_nodes": 2, "edges": [[0, "x"]]})
        with pytest.raises(DatasetError, match="edges/0/1"):
            load_dataset(p)

    def test_missing_required(self):
        with pytest.raises(DatasetError, match="edges"):
            parse_dataset({"schema_version": 1, "num_nodes": 2})

    def test_wrong_version(self):
        with pytest.raises(DatasetError, match="schema_version"):
            parse_dataset({"schema_version": 2, "num_nodes": 2, "edges": []})

    def test_length_mismatch(self):
        with pytest.raises(DatasetError, match="labels"):
            parse_dataset({"schema_version": 1, "num_nodes": 3, "edges": [], "labels": [0, 1]})

    def test_ragged_features(self):
        with pytest.raises(DatasetError, match="unequal"):
            parse_dataset({"schema_version": 1, "num_nodes": 2, "edges": [], "node_features": [[1.0], [1.0, 2.0]]})

    def test_hyperedge_members_checked(self):
        with pytest.raises(DatasetError):
            parse_dataset({"schema_version": 1, "num_nodes": 2, "edges": [], "hyperedges": [[0, 4]]})

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="nope.json"):
            load_dataset(tmp_path / "nope.json")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 12), st.data())
    def test_accepted_files_yield_valid_structures(self, n, data):
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        edges = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=20))
        hyper = data.draw(st.lists(st.lists(st.integers(0, n - 1), min_size=2, max_size=5), max_size=5))
        ds = parse_dataset({"schema_version": 1, "num_nodes": n, "edges": [list(e) for e in edges], "hyperedges": hyper})
        cc = build_complex(ds, "provided", {"min_size": 2})
        assert validate_complex(cc).ok


class TestRoundTrip:
    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        g = Graph(5, [(3, 1), (0, 4)], node_features=rng.standard_normal((5, 2)), labels=[0, 1, 0, 1, 1])
        ds = LoadedDataset(
            g, positions=[0, 10, 20, 30, 40], partitions=["a"] * 5, embeddings=rng.standard_normal((5, 3)),
            hyperedges=HyperedgeSet([[0, 1, 2]]),
        )
        p = tmp_path / "d.json"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert back.graph.canonical() == g.canonical()
        assert dataset_to_dict(back) == dataset_to_dict(ds)

    def test_complex_round_trip_valid(self, tmp_path):
        g = two_triangles()
        cc = build_combinatorial_complex(g, clique_hyperedges(g))
        save_complex(cc, tmp_path / "cc.json")
        back = load_complex(tmp_path / "cc.json")
        assert back == cc and validate_complex(back).ok
        doc = json.loads((tmp_path / "cc.json").read_text())
        assert {c["provenance"] for c in doc["cells"]} == {"singleton", "simple_edge", "virtual_hyperedge"}

    def test_metrics_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_metrics([], tmp_path / "m.json")

    def test_metrics_aggregate(self, tmp_path):
        recs = [MetricsRecord(s, "accuracy", [0.5], v, t, v, t, 3) for s, v, t in [(0, 80.0, 70.0), (1, 90.0, 74.0)]]
        save_metrics(recs, tmp_path / "m.json")
        doc = load_metrics(tmp_path / "m.json")
        assert len(doc["runs"]) == 2
        assert doc["aggregate"]["test_mean"] == 72.0
        assert doc["aggregate"]["test_std"] == pytest.approx(np.std([70.0, 74.0], ddof=1), rel=1e-14)

    def test_model_state_round_trip(self, tmp_path):
        state = {"emb0.weight": np.arange(6.0).reshape(2, 3), "out.bias": np.zeros((1, 2))}
        save_model_state(tmp_path / "s.npz", state, {"backbone": "gcn"})
        back, meta = load_model_state(tmp_path / "s.npz")
        assert meta == {"backbone": "gcn"}
        np.testing.assert_array_equal(back["emb0.weight"], state["emb0.weight"])

    def test_bad_model_state(self, tmp_path):
        (tmp_path / "s.npz").write_bytes(b"junk")
        with pytest.raises(DatasetError):
            load_model_state(tmp_path / "s.npz")


class TestStrategies:
    def _ds(self, **kw):
        return LoadedDataset(complete(4), **kw)

    def test_cliques_default_min_three(self):
        assert extract_hyperedges(LoadedDataset(two_triangles()), "cliques").hyperedges == ((0, 1, 2), (3, 4, 5))

    def test_window(self):
        ds = self._ds(positions=[0, 100_000, 350_000, 400_000])
        assert extract_hyperedges(ds, "window", {"min_size": 2}).hyperedges == ((0, 1), (2, 3))

    def test_threshold_needs_tau(self):
        ds = self._ds(embeddings=np.zeros((4, 2)))
        with pytest.raises(DatasetError, match="tau"):
            extract_hyperedges(ds, "threshold")
        assert len(extract_hyperedges(ds, "threshold", {"tau": 0.1})) == 1

    def test_missing_inputs(self):
        for strategy in ("window", "threshold", "provided"):
            with pytest.raises(DatasetError):
                extract_hyperedges(self._ds(), strategy, {"tau": 1.0})

    def test_unknown_strategy(self):
        with pytest.raises(DatasetError):
            extract_hyperedges(self._ds(), "spectral")

    def test_provided_small_groups_admitted(self):
        ds = LoadedDataset(Graph(4, [(0, 1)]), hyperedges=HyperedgeSet([[0], [0, 1], [1, 2, 3]]))
        cc = build_complex(ds, "provided", {"min_size": 1})
        assert cc.cells_of_rank(2) == [(1, 2, 3)]
        assert validate_complex(cc).ok


class TestExperimentConfig:
    def test_defaults_and_paths(self, tmp_path):
        p = write(tmp_path, "cfg.json", {"dataset": "d.json", "output": "out/m.json"})
        cfg = ExperimentConfig.load(p)
        assert cfg.dataset == str(tmp_path / "d.json")
        assert cfg.seeds == [0, 1, 2, 3, 4] and cfg.epochs == 500 and cfg.augmentation == "topoaug"
        tc = cfg.train_config("classification")
        assert (tc.lr, tc.hidden_dim, tc.dropout) == (0.001, 64, 0.5)

    def test_unknown_field(self):
        with pytest.raises(DatasetError, match="unknown fields"):
            ExperimentConfig.from_dict({"dataset": "d", "learning_rate": 0.1})

    def test_threshold_params_required(self):
        with pytest.raises(DatasetError, match="tau"):
            ExperimentConfig.from_dict({"dataset": "d", "strategy": "threshold"})

    @pytest.mark.parametrize(
        "field,value", [("strategy", "kmeans"), ("model", "gat"), ("augmentation", "mixup"), ("seeds", [])]
    )
    def test_invalid_values(self, field, value):
        with pytest.raises(DatasetError):
            ExperimentConfig.from_dict({"dataset": "d", field: value})

    def test_model_aliases(self):
        assert ExperimentConfig(dataset="d", model="graphsage").variant().backbone == "sage_mean"
