"""Benchmark the compiled kernels against the NumPy fallback.

Runs the three hot kernels on synthetic data at full experiment scale and
prints wall times for both backends plus agreement checks.

    python3 benchmarks/bench_kernels.py [--users 943] [--items 1682] [--entries 100000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from robustcf.graph import build_graph
from robustcf.kernels import py_backend
from robustcf.profile_model import floor_simplex
from robustcf.synth import synthetic_ratings

try:
    from robustcf.kernels import _native
except ImportError:
    _native = None


def timed(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=943)
    parser.add_argument("--items", type=int, default=1682)
    parser.add_argument("--entries", type=int, default=100000)
    parser.add_argument("--rank", type=int, default=10)
    args = parser.parse_args()

    if _native is None:
        print("compiled extension not built; run pip install -e . first")
        return

    ratings = synthetic_ratings(args.users, args.items, args.entries, seed=1)
    print(f"data: {ratings.m} users x {ratings.n} items, {ratings.n_entries} ratings\n")
    print(f"{'kernel':<24} {'numpy':>10} {'native':>10} {'speedup':>9}  agreement")

    indptr = np.ascontiguousarray(ratings.user_indptr, np.int64)
    cols = np.ascontiguousarray(ratings.items, np.int64)
    vals = np.ascontiguousarray(ratings.ratings, np.int64)
    levels = np.ascontiguousarray(ratings.levels, np.int64)
    stats_args = (indptr, cols, vals, levels, ratings.m, ratings.n, ratings.scale.K)
    t_py, out_py = timed(py_backend.pairwise_corated_stats, *stats_args, repeats=1)
    t_c, out_c = timed(_native.pairwise_corated_stats, *stats_args, repeats=1)
    exact = all(np.array_equal(a, b) for a, b in zip(out_py, out_c))
    print(f"{'pairwise_corated_stats':<24} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>8.1f}x  bitwise={exact}")

    graph = build_graph(ratings, "users", k=10)
    rng = np.random.default_rng(0)
    q = floor_simplex(rng.dirichlet(np.ones(ratings.scale.K), size=ratings.m), 1e-8)
    p = floor_simplex(rng.dirichlet(np.ones(ratings.scale.K), size=ratings.n), 1e-8)
    sweep_args = (
        indptr,
        cols,
        levels,
        p,
        q,
        np.ascontiguousarray(graph.indptr, np.int64),
        np.ascontiguousarray(graph.neighbors, np.int64),
        np.ascontiguousarray(graph.weights, np.float64),
        np.ascontiguousarray(graph.degrees, np.float64),
        0.3,
        1e-8,
        False,
    )
    t_py, out_py = timed(py_backend.profile_sweep, *sweep_args)
    t_c, out_c = timed(_native.profile_sweep, *sweep_args)
    close = np.allclose(out_py, out_c, rtol=1e-12, atol=0)
    print(f"{'profile_sweep':<24} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>8.1f}x  rtol1e-12={close}")

    users = np.ascontiguousarray(ratings.users, np.int64)
    items = np.ascontiguousarray(ratings.items, np.int64)
    values = np.ascontiguousarray(ratings.ratings, np.float64)
    mean = ratings.global_mean()

    def run_sgd(mod):
        bu = np.zeros(ratings.m)
        bi = np.zeros(ratings.n)
        u = np.random.default_rng(3).normal(0.0, 0.1, (ratings.m, args.rank))
        v = np.random.default_rng(4).normal(0.0, 0.1, (ratings.n, args.rank))
        mod.sgd_epoch(users, items, values, mean, bu, bi, u, v, 0.005, 0.02)
        return bu, bi, u, v

    t_py, out_py = timed(run_sgd, py_backend, repeats=1)
    t_c, out_c = timed(run_sgd, _native, repeats=1)
    close = all(np.allclose(a, b, rtol=1e-10, atol=1e-14) for a, b in zip(out_py, out_c))
    print(f"{'sgd_epoch':<24} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>8.1f}x  rtol1e-10={close}")


if __name__ == "__main__":
    main()
