import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustcf.graph import (
    SimilarityGraph,
    UndefinedSimilarityError,
    agreement_weight,
    build_graph,
    laplacian_quadratic,
    pearson_similarity,
)

from .conftest import matrix_from_triples, random_matrix


def pair_matrix(vals_a, vals_b):
    """Two users co-rating items 0..len-1 with the given values."""
    triples = [(0, i, r) for i, r in enumerate(vals_a)]
    triples += [(1, i, r) for i, r in enumerate(vals_b)]
    triples += [(2, 0, 1)]  # third user so k=1 graphs are legal
    return matrix_from_triples(triples)


def test_pearson_perfect_correlation():
    rm = pair_matrix([1, 2, 3], [1, 2, 3])
    assert pearson_similarity(rm, "users", 0, 1) == pytest.approx(1.0)


def test_pearson_perfect_anticorrelation():
    rm = pair_matrix([1, 2, 3], [3, 2, 1])
    assert pearson_similarity(rm, "users", 0, 1) == pytest.approx(-1.0)


def test_pearson_matches_textbook_oracle():
    rm = pair_matrix([1, 2, 3, 4], [2, 2, 4, 4])
    # frozen from the mean-centered textbook formula computed separately
    assert pearson_similarity(rm, "users", 0, 1) == pytest.approx(0.8944271909999159, abs=1e-12)


def test_pearson_undefined_cases():
    rm = matrix_from_triples([(0, 0, 3), (1, 1, 4), (2, 0, 1), (2, 1, 2)])
    with pytest.raises(UndefinedSimilarityError):
        pearson_similarity(rm, "users", 0, 1)  # no co-rated items
    rm2 = pair_matrix([2, 2, 2], [1, 3, 5])
    with pytest.raises(UndefinedSimilarityError):
        pearson_similarity(rm2, "users", 0, 1)  # zero variance side
    rm3 = matrix_from_triples([(0, 0, 1), (1, 0, 2), (2, 1, 3)])
    with pytest.raises(UndefinedSimilarityError):
        pearson_similarity(rm3, "users", 0, 1)  # single co-observation


def test_agreement_weight_examples():
    rm = pair_matrix([5, 3, 1], [5, 3, 2])
    assert agreement_weight(rm, "users", 0, 1) == 2  # frozen from exhaustive enumeration
    disjoint = matrix_from_triples([(0, 0, 4), (0, 1, 4), (1, 2, 4), (1, 3, 4)])
    assert agreement_weight(disjoint, "users", 0, 1) == 0
    same = pair_matrix([1, 2, 3, 4, 5, 1, 2], [1, 2, 3, 4, 5, 1, 2])
    assert agreement_weight(same, "users", 0, 1) == 7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_agreement_symmetry(seed):
    rng = np.random.default_rng(seed)
    rm = random_matrix(rng, 6, 6, 0.5)
    for a in range(rm.m):
        for b in range(rm.m):
            assert agreement_weight(rm, "users", a, b) == agreement_weight(rm, "users", b, a)


def test_items_axis_matches_transposed_users_axis():
    rm = matrix_from_triples([(0, 0, 4), (0, 1, 4), (1, 0, 4), (1, 1, 2), (2, 0, 1), (2, 1, 1)])
    flipped = matrix_from_triples([(0, 0, 4), (1, 0, 4), (0, 1, 4), (1, 1, 2), (0, 2, 1), (1, 2, 1)])
    assert agreement_weight(rm, "items", 0, 1) == agreement_weight(flipped, "users", 0, 1)
    assert pearson_similarity(rm, "items", 0, 1) == pearson_similarity(flipped, "users", 0, 1)


def brute_force_graph(rm, axis, k):
    """All-pairs reference construction from the single-pair operations."""
    size = rm.m if axis == "users" else rm.n
    selected = {}
    for a in range(size):
        scored = []
        for b in range(size):
            if b == a:
                continue
            try:
                sim = pearson_similarity(rm, axis, a, b)
            except UndefinedSimilarityError:
                continue
            scored.append((-sim, -agreement_weight(rm, axis, a, b), b))
        scored.sort()
        for _, _, b in scored[:k]:
            pair = (min(a, b), max(a, b))
            selected[pair] = agreement_weight(rm, axis, a, b)
    edges = {pair: w for pair, w in selected.items() if w > 0}
    degrees = [0.0] * size
    for (a, b), w in edges.items():
        degrees[a] += w
        degrees[b] += w
    return edges, degrees


@pytest.mark.parametrize("axis", ["users", "items"])
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_build_graph_matches_brute_force(axis, seed):
    rng = np.random.default_rng(seed)
    rm = random_matrix(rng, 12, 9, 0.45)
    k = 3
    graph = build_graph(rm, axis, k=k)
    edges, degrees = brute_force_graph(rm, axis, k)
    got = {(a, b): w for a, b, w in graph.edge_list()}
    assert got == edges
    assert np.allclose(graph.degrees, degrees)


def test_build_graph_structural_small():
    rm = matrix_from_triples(
        [(0, 0, 5), (0, 1, 3), (1, 0, 5), (1, 1, 3), (2, 0, 5), (2, 1, 4), (2, 2, 1)]
    )
    graph = build_graph(rm, "users", k=1)
    assert graph.size == 3
    # union symmetrization: every node retains at least one incident edge
    assert all(graph.indptr[j + 1] > graph.indptr[j] for j in range(2))
    for j in range(graph.size):
        _, weights = graph.neighbor_row(j)
        assert graph.degrees[j] == pytest.approx(weights.sum())


def test_disconnected_blocs_stay_disconnected():
    triples = [(u, i, (u + i) % 5 + 1) for u in range(3) for i in range(3)]
    triples += [(u + 3, i + 3, (u * i) % 5 + 1) for u in range(3) for i in range(3)]
    rm = matrix_from_triples(triples)
    graph = build_graph(rm, "users", k=2)
    for a, b, _ in graph.edge_list():
        assert (a < 3) == (b < 3)


def test_graph_k_preconditions(tiny_matrix):
    with pytest.raises(ValueError):
        build_graph(tiny_matrix, "users", k=0)
    with pytest.raises(ValueError):
        build_graph(tiny_matrix, "users", k=tiny_matrix.m)


def test_zero_weight_edges_dropped():
    # users correlate but never give the same value to the same item
    rm = pair_matrix([1, 2, 3], [2, 3, 4])
    graph = build_graph(rm, "users", k=1)
    assert all(w > 0 for _, _, w in graph.edge_list())


def single_edge_graph(weight=3.0):
    return SimilarityGraph(
        axis="users",
        size=2,
        k=1,
        indptr=np.array([0, 1, 2], dtype=np.int64),
        neighbors=np.array([1, 0], dtype=np.int64),
        weights=np.array([weight, weight]),
        degrees=np.array([weight, weight]),
    )


def test_laplacian_quadratic_examples():
    graph = single_edge_graph(3.0)
    assert laplacian_quadratic(graph, [1.0, 0.0]) == pytest.approx(3.0)
    assert laplacian_quadratic(graph, [2.5, 2.5]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        laplacian_quadratic(graph, [1.0, 2.0, 3.0])


def test_laplacian_quadratic_matches_pairwise_oracle():
    rng = np.random.default_rng(4)
    rm = random_matrix(rng, 10, 8, 0.5)
    graph = build_graph(rm, "users", k=3)
    for _ in range(50):
        x = rng.normal(size=graph.size)
        # half the weighted squared differences over ordered pairs = once per edge
        direct = sum(w * (x[a] - x[b]) ** 2 for a, b, w in graph.edge_list())
        assert laplacian_quadratic(graph, x) == pytest.approx(direct, rel=1e-10)


def test_laplacian_psd_many_vectors():
    rng = np.random.default_rng(9)
    for seed in range(5):
        rm = random_matrix(np.random.default_rng(seed), 8, 8, 0.5)
        graph = build_graph(rm, "users", k=3)
        for _ in range(200):
            x = rng.normal(size=graph.size)
            assert laplacian_quadratic(graph, x) >= -1e-12
        assert laplacian_quadratic(graph, np.ones(graph.size)) == pytest.approx(0.0, abs=1e-12)


def test_degree_identity_on_built_graphs():
    for seed in range(4):
        rm = random_matrix(np.random.default_rng(seed), 10, 7, 0.4)
        for axis in ("users", "items"):
            graph = build_graph(rm, axis, k=3)
            for j in range(graph.size):
                _, weights = graph.neighbor_row(j)
                assert graph.degrees[j] == pytest.approx(weights.sum())


def test_edge_dump_format(tmp_path):
    graph = single_edge_graph(2.0)
    out = tmp_path / "edges.tsv"
    graph.dump_edges(out)
    assert out.read_text() == "0\t1\t2\n"


def test_isolated_nodes_allowed():
    # user 2 shares no co-rated items with anyone
    rm = matrix_from_triples([(0, 0, 3), (0, 1, 4), (1, 0, 3), (1, 1, 5), (2, 2, 1)])
    graph = build_graph(rm, "users", k=1)
    assert graph.degrees[2] == 0.0
    nbrs, _ = graph.neighbor_row(2)
    assert nbrs.size == 0
