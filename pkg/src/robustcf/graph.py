"""k-nearest-neighbor similarity graphs over users or items.

Neighbor selection and edge weighting are deliberately decoupled: the k
nearest neighbors of each node are chosen by Pearson correlation over
co-observed ratings, and every selected edge is then weighted by the
agreement count (how many times the two nodes gave the identical rating to
the same column). The edge set is symmetrized by union, weights are already
symmetric, and the graph Laplacian L = D - W enters the model through its
quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .data import RatingMatrix

AXES = ("users", "items")


class UndefinedSimilarityError(ValueError):
    """Pearson similarity is undefined: <2 co-observations or zero variance."""


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected weighted graph in CSR adjacency form.

    Every undirected edge appears in both endpoint rows with the same
    weight; weights are positive integers (agreement counts) stored as
    floats; ``degrees[j]`` is the sum of weights incident to j. Nodes with
    no defined similarity to anyone are isolated (degree 0).
    """

    axis: str
    size: int
    k: int
    indptr: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray
    degrees: np.ndarray

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.neighbors.size // 2)

    def neighbor_row(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.neighbors[lo:hi], self.weights[lo:hi]

    def edge_list(self) -> list[tuple[int, int, float]]:
        """Each undirected edge once, as (a, b, weight) with a < b, sorted."""
        out = []
        for a in range(self.size):
            nbrs, wts = self.neighbor_row(a)
            for b, w in zip(nbrs, wts):
                if a < b:
                    out.append((a, int(b), float(w)))
        return out

    def dump_edges(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for a, b, w in self.edge_list():
                fh.write(f"{a}\t{b}\t{w:g}\n")


def _axis_csr(ratings: RatingMatrix, axis: str):
    """(indptr, cols, rating values, levels, n_nodes, n_other) for an axis."""
    if axis == "users":
        return (
            ratings.user_indptr,
            ratings.items,
            ratings.ratings,
            ratings.levels,
            ratings.m,
            ratings.n,
        )
    if axis == "items":
        return (
            ratings.item_indptr,
            ratings.item_users,
            ratings.item_ratings,
            ratings.item_levels,
            ratings.n,
            ratings.m,
        )
    raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def _node_row(ratings: RatingMatrix, axis: str, node: int):
    if axis == "users":
        return ratings.user_rows(node)
    if axis == "items":
        return ratings.item_cols(node)
    raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def _corated(ratings: RatingMatrix, axis: str, a: int, b: int):
    cols_a, vals_a = _node_row(ratings, axis, a)
    cols_b, vals_b = _node_row(ratings, axis, b)
    _, idx_a, idx_b = np.intersect1d(cols_a, cols_b, assume_unique=True, return_indices=True)
    return vals_a[idx_a], vals_b[idx_b]


def _pearson_from_stats(n: float, sa: float, sb: float, saa: float, sbb: float, sab: float):
    """Pearson r from exact integer co-observation sums; None when undefined.

    Computed from n*cov and n*var forms so all intermediate quantities stay
    integral and every code path (single pair, all-pairs kernel, brute-force
    checks) produces bit-identical values.
    """
    if n < 2:
        return None
    var_a = n * saa - sa * sa
    var_b = n * sbb - sb * sb
    if var_a <= 0 or var_b <= 0:
        return None
    return (n * sab - sa * sb) / (np.sqrt(var_a) * np.sqrt(var_b))


def pearson_similarity(ratings: RatingMatrix, axis: str, a: int, b: int) -> float:
    """Pearson correlation of the co-observed rating pairs of two nodes.

    Raises UndefinedSimilarityError when fewer than 2 co-observations exist
    or either side has zero variance over them; neighbor ranking treats such
    pairs as worse than any defined value.
    """
    va, vb = _corated(ratings, axis, a, b)
    va = va.astype(np.float64)
    vb = vb.astype(np.float64)
    r = _pearson_from_stats(
        float(va.size),
        float(va.sum()),
        float(vb.sum()),
        float((va * va).sum()),
        float((vb * vb).sum()),
        float((va * vb).sum()),
    )
    if r is None:
        raise UndefinedSimilarityError(
            f"similarity of {axis} pair ({a}, {b}) is undefined"
        )
    return float(r)


def agreement_weight(ratings: RatingMatrix, axis: str, a: int, b: int) -> int:
    """How many co-observed columns got the identical rating from both nodes."""
    va, vb = _corated(ratings, axis, a, b)
    return int((va == vb).sum())


def build_graph(ratings: RatingMatrix, axis: str, k: int = 10) -> SimilarityGraph:
    """k-NN graph: neighbors by Pearson, edge weights by agreement count.

    Each node selects its k most Pearson-similar peers (ties broken by
    higher agreement weight, then lower index); the edge set is the union of
    selections; edges whose agreement weight is zero are dropped. The result
    is deterministic for a given matrix.
    """
    indptr, cols, vals, levels, size, n_other = _axis_csr(ratings, axis)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= size:
        raise ValueError(f"k={k} must be smaller than the node count {size}")

    counts, sums, sq_sums, cross, agree = kernels.pairwise_corated_stats(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        np.ascontiguousarray(vals, dtype=np.int64),
        np.ascontiguousarray(levels, dtype=np.int64),
        size,
        n_other,
        ratings.scale.K,
    )

    var_a = counts * sq_sums - sums * sums
    var_b = var_a.T
    valid = (counts >= 2) & (var_a > 0) & (var_b > 0)
    np.fill_diagonal(valid, False)
    pear = np.full((size, size), -np.inf)
    num = counts * cross - sums * sums.T
    den = np.sqrt(var_a, where=valid, out=np.ones_like(var_a)) * np.sqrt(
        var_b, where=valid, out=np.ones_like(var_b)
    )
    pear[valid] = num[valid] / den[valid]

    pair_weight: dict[tuple[int, int], float] = {}
    index_key = np.arange(size)
    for a in range(size):
        n_valid = int(valid[a].sum())
        take = min(k, n_valid)
        if take == 0:
            continue
        order = np.lexsort((index_key, -agree[a], -pear[a]))
        for b in order[:take]:
            key = (a, int(b)) if a < b else (int(b), a)
            pair_weight[key] = agree[a, b]

    edges = [(a, b, w) for (a, b), w in pair_weight.items() if w > 0]
    adj: list[list[tuple[int, float]]] = [[] for _ in range(size)]
    for a, b, w in edges:
        adj[a].append((b, w))
        adj[b].append((a, w))

    graph_indptr = np.zeros(size + 1, dtype=np.int64)
    neighbors = np.zeros(2 * len(edges), dtype=np.int64)
    weights = np.zeros(2 * len(edges))
    pos = 0
    for j in range(size):
        adj[j].sort()
        for b, w in adj[j]:
            neighbors[pos] = b
            weights[pos] = w
            pos += 1
        graph_indptr[j + 1] = pos
    degrees = np.zeros(size)
    for j in range(size):
        degrees[j] = weights[graph_indptr[j] : graph_indptr[j + 1]].sum()

    return SimilarityGraph(
        axis=axis,
        size=size,
        k=k,
        indptr=graph_indptr,
        neighbors=neighbors,
        weights=weights,
        degrees=degrees,
    )


def laplacian_quadratic(graph: SimilarityGraph, x) -> float:
    """x' L x = sum_j d_j x_j^2 - sum_jt w_jt x_j x_t, always >= 0.

    Equals half the weighted sum of squared differences across edges; zero
    exactly on constant vectors.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.size,):
        raise ValueError(f"expected a vector of length {graph.size}, got shape {x.shape}")
    diag = float(np.dot(graph.degrees, x * x))
    cross = float(np.dot(graph.weights * x[np.repeat(np.arange(graph.size), np.diff(graph.indptr))], x[graph.neighbors]))
    return diag - cross
