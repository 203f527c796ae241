"""NumPy implementations of the hot kernels.

These are the reference semantics for the compiled extension and the
fallback when it is not built. ``pairwise_corated_stats`` accumulates only
products and sums of small integers, so its outputs are exact and agree
bitwise with the compiled version; the floating-point kernels agree to
rounding error.
"""

from __future__ import annotations

import numpy as np


def pairwise_corated_stats(indptr, cols, ratings, levels, n_nodes, n_other, n_levels):
    """Co-observation statistics for every pair of nodes on one axis.

    For each ordered pair (a, b), over the columns both rated:
    counts[a, b]   number of co-rated columns
    sums[a, b]     sum of a's ratings on them
    sq_sums[a, b]  sum of a's squared ratings on them
    cross[a, b]    sum of a's rating times b's rating (symmetric)
    agree[a, b]    number of co-rated columns where the ratings are equal

    All outputs are exact small integers stored as float64.
    """
    dense_r = np.zeros((n_nodes, n_other))
    present = np.zeros((n_nodes, n_other))
    rows = np.repeat(np.arange(n_nodes), np.diff(indptr))
    dense_r[rows, cols] = ratings
    present[rows, cols] = 1.0

    counts = present @ present.T
    sums = dense_r @ present.T
    sq_sums = (dense_r * dense_r) @ present.T
    cross = dense_r @ dense_r.T

    agree = np.zeros((n_nodes, n_nodes))
    for k in range(n_levels):
        at_level = np.zeros((n_nodes, n_other))
        mask = levels == k
        at_level[rows[mask], cols[mask]] = 1.0
        agree += at_level @ at_level.T
    return counts, sums, sq_sums, cross, agree


def profile_sweep(
    indptr,
    cols,
    levels,
    other_profiles,
    self_profiles,
    w_indptr,
    w_cols,
    w_weights,
    degrees,
    reg_coeff,
    floor,
    matched_level_denom,
):
    """One full fixed-point sweep over the profiles of one axis.

    Every row is updated simultaneously from the current values (Jacobi
    order). For node j and level k the raw update is

        num / max(den + reg_coeff * lap, floor)

    where num sums the other axis's level-k profile entries over j's
    level-k observations, den sums the same entries divided by the pairwise
    normalizer s = sum_l other[i, l] * self[j, l] (over level-k observations
    when ``matched_level_denom``, over all of j's observations otherwise),
    and lap = degrees[j] * self[j, k] - sum_t w[j, t] * self[t, k]. Levels
    the node never used get the floor value. Rows are NOT renormalized here;
    the caller projects them back onto the probability simplex.
    """
    n_self, n_levels = self_profiles.shape
    entry_rows = np.repeat(np.arange(n_self), np.diff(indptr))
    s = np.einsum("ek,ek->e", other_profiles[cols], self_profiles[entry_rows])
    picked = other_profiles[cols, levels]

    flat = entry_rows * n_levels + levels
    size = n_self * n_levels
    num = np.bincount(flat, weights=picked, minlength=size).reshape(n_self, n_levels)
    used = np.bincount(flat, minlength=size).reshape(n_self, n_levels)
    if matched_level_denom:
        den = np.bincount(flat, weights=picked / s, minlength=size).reshape(n_self, n_levels)
    else:
        den = np.zeros((n_self, n_levels))
        np.add.at(den, entry_rows, other_profiles[cols] / s[:, None])

    neighbor_sum = np.zeros((n_self, n_levels))
    edge_rows = np.repeat(np.arange(n_self), np.diff(w_indptr))
    if w_cols.size:
        np.add.at(neighbor_sum, edge_rows, w_weights[:, None] * self_profiles[w_cols])
    lap = degrees[:, None] * self_profiles - neighbor_sum

    den = np.maximum(den + reg_coeff * lap, floor)
    raw = num / den
    raw[used == 0] = floor
    return raw


def sgd_epoch(users, items, ratings, global_mean, user_bias, item_bias, user_factors, item_factors, lr, reg):
    """One sequential pass of biased matrix-factorization SGD, in place.

    Divergence produces inf/nan silently (like the compiled version); the
    caller's loss check is responsible for detecting it.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        for e in range(users.size):
            u = users[e]
            i = items[e]
            err = ratings[e] - (global_mean + user_bias[u] + item_bias[i] + float(user_factors[u] @ item_factors[i]))
            user_bias[u] += lr * (err - reg * user_bias[u])
            item_bias[i] += lr * (err - reg * item_bias[i])
            u_old = user_factors[u].copy()
            user_factors[u] += lr * (err * item_factors[i] - reg * user_factors[u])
            item_factors[i] += lr * (err * u_old - reg * item_factors[i])
