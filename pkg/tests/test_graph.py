import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_adjacency, dense_incidence, dense_sym_norm, random_edge_list
from topoaug.graph import (
    Cell,
    CombinatorialComplex,
    Graph,
    HyperedgeSet,
    SparseMatrix,
    StructureError,
    build_adjacency,
    hyperedge_degrees,
    incidence_matrix,
    mean_adjacency,
    node_degrees,
    normalize_adjacency_sym,
    validate_complex,
)
from topoaug.synthetic import complete, cycle, two_triangles


@st.composite
def graphs(draw, max_nodes=9):
    n = draw(st.integers(1, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph(n, chosen)


class TestGraph:
    def test_edges_canonicalized(self):
        g = Graph(3, [(2, 0), (1, 2)])
        assert g.edges.tolist() == [[0, 2], [1, 2]]

    def test_self_loop_rejected(self):
        with pytest.raises(StructureError, match="self-loop"):
            Graph(3, [(1, 1)])

    def test_duplicate_after_canonicalization_rejected(self):
        with pytest.raises(StructureError, match="duplicate"):
            Graph(3, [(0, 1), (1, 0)])

    def test_endpoint_out_of_range_names_edge(self):
        with pytest.raises(StructureError, match=r"\(0, 5\)"):
            Graph(3, [(0, 5)])

    def test_feature_rows_must_match(self):
        with pytest.raises(StructureError):
            Graph(3, [], node_features=np.zeros((2, 4)))

    def test_immutable_arrays(self):
        g = Graph(2, [(0, 1)], node_features=np.ones((2, 2)))
        with pytest.raises(ValueError):
            g.edges[0, 0] = 1
        with pytest.raises(ValueError):
            g.node_features[0, 0] = 5.0

    def test_neighbors(self):
        assert two_triangles().neighbors()[0] == {1, 2}


class TestHyperedgeSet:
    def test_dedup_and_order(self):
        h = HyperedgeSet([[2, 1, 0], [0, 1, 2], [3, 4]])
        assert h.hyperedges == ((0, 1, 2), (3, 4))

    def test_repeated_member_collapses(self):
        assert HyperedgeSet([[1, 1, 2]]).hyperedges == ((1, 2),)

    def test_min_size_enforced(self):
        with pytest.raises(StructureError):
            HyperedgeSet([[0, 1]], min_size=3)

    def test_members_checked_against_graph(self):
        with pytest.raises(StructureError):
            HyperedgeSet([[0, 7]]).check_members(4)


class TestSparseMatrix:
    def test_canonical_form(self):
        m = SparseMatrix.from_entries([0, 0, 1], [1, 1, 0], [1.0, 2.0, 0.0], (2, 2))
        assert m.nnz == 1
        assert m.toarray().tolist() == [[0.0, 3.0], [0.0, 0.0]]

    def test_dot_and_transpose(self):
        rng = np.random.default_rng(0)
        d = np.where(rng.random((5, 4)) < 0.5, rng.standard_normal((5, 4)), 0.0)
        m = SparseMatrix.from_dense(d)
        x = rng.standard_normal((4, 3))
        np.testing.assert_allclose(m.dot(x), d @ x, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(m.T.toarray(), d.T)
        np.testing.assert_array_equal(m.row_sums(), d.sum(1))

    def test_equality(self):
        d = np.eye(3)
        assert SparseMatrix.from_dense(d) == SparseMatrix.from_dense(d.copy())
        assert SparseMatrix.from_dense(d) != SparseMatrix.from_dense(2 * d)


class TestAdjacency:
    def test_path(self):
        np.testing.assert_array_equal(build_adjacency(Graph(2, [(0, 1)])).toarray(), [[0, 1], [1, 0]])

    def test_empty(self):
        np.testing.assert_array_equal(build_adjacency(Graph(3, [])).toarray(), np.zeros((3, 3)))

    def test_random_matches_dense_fill(self):
        rng = np.random.default_rng(1)
        pairs = [(i, j) for i in range(8) for j in range(i + 1, 8)]
        idx = rng.choice(len(pairs), size=12, replace=False)
        edges = [pairs[k] for k in sorted(idx)]
        a = build_adjacency(Graph(8, edges))
        assert a == SparseMatrix.from_dense(dense_adjacency(8, edges))

    @given(graphs())
    def test_symmetric_and_row_sums_are_degrees(self, g):
        a = build_adjacency(g).toarray()
        np.testing.assert_array_equal(a, a.T)
        assert np.all(np.diag(a) == 0)
        np.testing.assert_array_equal(a.sum(1), node_degrees(g))


class TestNormalization:
    def test_path(self):
        out = normalize_adjacency_sym(build_adjacency(Graph(2, [(0, 1)]))).toarray()
        np.testing.assert_allclose(out, [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=1e-15)

    def test_isolated_node(self):
        np.testing.assert_allclose(normalize_adjacency_sym(build_adjacency(Graph(1, []))).toarray(), [[1.0]])

    @pytest.mark.parametrize("g,k", [(complete(3), 2), (complete(4), 3), (cycle(6), 2)])
    def test_regular_graphs_constant(self, g, k):
        out = normalize_adjacency_sym(build_adjacency(g)).toarray()
        nz = out[out != 0]
        np.testing.assert_allclose(nz, 1.0 / (k + 1), rtol=1e-15)
        assert nz.size == g.num_nodes * (k + 1)

    def test_random_matches_dense(self):
        rng = np.random.default_rng(2)
        edges = random_edge_list(9, 0.35, rng)
        out = normalize_adjacency_sym(build_adjacency(Graph(9, edges))).toarray()
        np.testing.assert_allclose(out, dense_sym_norm(dense_adjacency(9, edges)), rtol=1e-14, atol=1e-15)

    def test_mean_adjacency_rows(self):
        g = Graph(4, [(0, 1), (0, 2)])
        m = mean_adjacency(build_adjacency(g)).toarray()
        np.testing.assert_allclose(m.sum(1), [1, 1, 1, 0])
        np.testing.assert_allclose(m[0], [0, 0.5, 0.5, 0])


class TestIncidence:
    def test_single_column(self):
        np.testing.assert_array_equal(incidence_matrix(HyperedgeSet([[0, 2]]), 3).toarray(), [[1], [0], [1]])

    def test_empty(self):
        assert incidence_matrix(HyperedgeSet([]), 4).shape == (4, 0)

    def test_two_triangles_block(self):
        h = incidence_matrix(HyperedgeSet([[0, 1, 2], [3, 4, 5]]), 6).toarray()
        np.testing.assert_array_equal(h, dense_incidence(6, [(0, 1, 2), (3, 4, 5)]))

    def test_out_of_range_names_cell(self):
        with pytest.raises(StructureError, match=r"\[0, 9\]"):
            incidence_matrix([[0, 9]], 4)

    def test_complex_rank_filter(self):
        cc = CombinatorialComplex(3, [((0,), 0), ((1,), 0), ((2,), 0), ((0, 1), 1), ((0, 1, 2), 2)])
        assert incidence_matrix(cc, 3, ranks=(2,)).shape == (3, 1)
        assert incidence_matrix(cc, 3).shape == (3, 5)

    @given(st.lists(st.lists(st.integers(0, 7), min_size=1, max_size=5), max_size=8))
    def test_column_sums_are_hyperedge_degrees(self, raw):
        h = HyperedgeSet(raw)
        np.testing.assert_array_equal(incidence_matrix(h, 8).col_sums(), hyperedge_degrees(h))


class TestDegrees:
    def test_k4(self):
        assert node_degrees(complete(4)).tolist() == [3, 3, 3, 3]

    def test_hyperedge(self):
        assert hyperedge_degrees(HyperedgeSet([[0, 1, 2]])).tolist() == [3]

    def test_random_matches_dense_row_sums(self):
        rng = np.random.default_rng(3)
        edges = random_edge_list(10, 0.4, rng)
        np.testing.assert_array_equal(node_degrees(Graph(10, edges)), dense_adjacency(10, edges).sum(1))


class TestValidateComplex:
    def test_forced_order_violation(self):
        cells = [((v,), 0) for v in range(3)] + [Cell((0, 1), 2, "virtual_hyperedge"), Cell((0, 1, 2), 1, "simple_edge")]
        report = validate_complex(CombinatorialComplex(3, cells))
        assert report.order_violations == [((0, 1), (0, 1, 2))]
        assert not report.ok

    def test_missing_singleton(self):
        cells = [((v,), 0) for v in range(3)] + [((0, 1), 1)]
        report = validate_complex(CombinatorialComplex(4, cells))
        assert report.missing_singletons == [3]
        assert len(report) == 1

    def test_duplicate_cell(self):
        cells = [((0,), 0), ((1,), 0), ((0, 1), 1), ((1, 0), 1)]
        assert validate_complex(CombinatorialComplex(2, cells)).duplicate_cells == [(0, 1)]

    def test_rank_provenance_mismatch(self):
        cells = [((0,), 0), ((1,), 0), Cell((0, 1), 2, "simple_edge")]
        assert validate_complex(CombinatorialComplex(2, cells)).rank_mismatches

    def test_valid_report_empty(self):
        cells = [((0,), 0), ((1,), 0), ((0, 1), 1)]
        report = validate_complex(CombinatorialComplex(2, cells))
        assert report.ok and report.messages() == []

    def test_bad_rank_rejected_at_construction(self):
        with pytest.raises(StructureError):
            CombinatorialComplex(2, [((0,), 3)])

    def test_validator_matches_pairwise_scan(self):
        # Random hand-built complexes, checked against an O(cells^2) subset scan.
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = 6
            cells = {}
            for v in range(n):
                if rng.random() < 0.9:
                    cells[(v,)] = 0
            for _ in range(8):
                size = int(rng.integers(2, 5))
                nodes = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
                cells[nodes] = int(rng.integers(1, 3))
            cc = CombinatorialComplex(n, [(k, r) for k, r in cells.items()])
            expected = sorted(
                (x, y) for x, rx in cells.items() for y, ry in cells.items() if x != y and set(x) <= set(y) and rx > ry
            )
            report = validate_complex(cc)
            assert report.order_violations == expected
            assert report.missing_singletons == [v for v in range(n) if (v,) not in cells]
