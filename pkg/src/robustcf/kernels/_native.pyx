# Compiled twins of the kernels in py_backend.py. Same signatures, same
# semantics; see that module for the contracts. Rows of `cols` must be
# sorted within each CSR row (pairwise stats walk sorted intersections).

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pairwise_corated_stats(
    const cnp.int64_t[::1] indptr,
    const cnp.int64_t[::1] cols,
    const cnp.int64_t[::1] ratings,
    const cnp.int64_t[::1] levels,
    Py_ssize_t n_nodes,
    Py_ssize_t n_other,
    Py_ssize_t n_levels,
):
    counts_arr = np.zeros((n_nodes, n_nodes))
    sums_arr = np.zeros((n_nodes, n_nodes))
    sq_sums_arr = np.zeros((n_nodes, n_nodes))
    cross_arr = np.zeros((n_nodes, n_nodes))
    agree_arr = np.zeros((n_nodes, n_nodes))
    cdef double[:, ::1] counts = counts_arr
    cdef double[:, ::1] sums = sums_arr
    cdef double[:, ::1] sq_sums = sq_sums_arr
    cdef double[:, ::1] cross = cross_arr
    cdef double[:, ::1] agree = agree_arr

    cdef Py_ssize_t a, b, ia, ib, enda, endb
    cdef double n_ab, s_a, s_b, ss_a, ss_b, x_ab, ag_ab, ra, rb
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            ia = indptr[a]
            ib = indptr[b]
            enda = indptr[a + 1]
            endb = indptr[b + 1]
            n_ab = 0.0
            s_a = 0.0
            s_b = 0.0
            ss_a = 0.0
            ss_b = 0.0
            x_ab = 0.0
            ag_ab = 0.0
            while ia < enda and ib < endb:
                if cols[ia] == cols[ib]:
                    ra = ratings[ia]
                    rb = ratings[ib]
                    n_ab += 1.0
                    s_a += ra
                    s_b += rb
                    ss_a += ra * ra
                    ss_b += rb * rb
                    x_ab += ra * rb
                    if ratings[ia] == ratings[ib]:
                        ag_ab += 1.0
                    ia += 1
                    ib += 1
                elif cols[ia] < cols[ib]:
                    ia += 1
                else:
                    ib += 1
            counts[a, b] = n_ab
            counts[b, a] = n_ab
            sums[a, b] = s_a
            sums[b, a] = s_b
            sq_sums[a, b] = ss_a
            sq_sums[b, a] = ss_b
            cross[a, b] = x_ab
            cross[b, a] = x_ab
            agree[a, b] = ag_ab
            agree[b, a] = ag_ab
    # Diagonal self-stats, matching the dense-product fallback.
    cdef Py_ssize_t e
    for a in range(n_nodes):
        n_ab = 0.0
        s_a = 0.0
        ss_a = 0.0
        for e in range(indptr[a], indptr[a + 1]):
            ra = ratings[e]
            n_ab += 1.0
            s_a += ra
            ss_a += ra * ra
        counts[a, a] = n_ab
        sums[a, a] = s_a
        sq_sums[a, a] = ss_a
        cross[a, a] = ss_a
        agree[a, a] = n_ab
    return counts_arr, sums_arr, sq_sums_arr, cross_arr, agree_arr


def profile_sweep(
    const cnp.int64_t[::1] indptr,
    const cnp.int64_t[::1] cols,
    const cnp.int64_t[::1] levels,
    const double[:, ::1] other_profiles,
    const double[:, ::1] self_profiles,
    const cnp.int64_t[::1] w_indptr,
    const cnp.int64_t[::1] w_cols,
    const double[::1] w_weights,
    const double[::1] degrees,
    double reg_coeff,
    double floor,
    bint matched_level_denom,
):
    cdef Py_ssize_t n_self = self_profiles.shape[0]
    cdef Py_ssize_t n_levels = self_profiles.shape[1]
    raw_arr = np.empty((n_self, n_levels))
    cdef double[:, ::1] raw = raw_arr
    num_arr = np.zeros(n_levels)
    den_arr = np.zeros(n_levels)
    used_arr = np.zeros(n_levels, dtype=np.int64)
    lap_arr = np.zeros(n_levels)
    cdef double[::1] num = num_arr
    cdef double[::1] den = den_arr
    cdef cnp.int64_t[::1] used = used_arr
    cdef double[::1] lap = lap_arr

    cdef Py_ssize_t j, e, k, t, other
    cdef double s, d, w
    for j in range(n_self):
        for k in range(n_levels):
            num[k] = 0.0
            den[k] = 0.0
            used[k] = 0
            lap[k] = degrees[j] * self_profiles[j, k]
        for e in range(w_indptr[j], w_indptr[j + 1]):
            t = w_cols[e]
            w = w_weights[e]
            for k in range(n_levels):
                lap[k] -= w * self_profiles[t, k]
        for e in range(indptr[j], indptr[j + 1]):
            other = cols[e]
            k = levels[e]
            s = 0.0
            for t in range(n_levels):
                s += other_profiles[other, t] * self_profiles[j, t]
            num[k] += other_profiles[other, k]
            used[k] += 1
            if matched_level_denom:
                den[k] += other_profiles[other, k] / s
            else:
                for t in range(n_levels):
                    den[t] += other_profiles[other, t] / s
        for k in range(n_levels):
            if used[k] == 0:
                raw[j, k] = floor
            else:
                d = den[k] + reg_coeff * lap[k]
                if d < floor:
                    d = floor
                raw[j, k] = num[k] / d
    return raw_arr


def sgd_epoch(
    const cnp.int64_t[::1] users,
    const cnp.int64_t[::1] items,
    const double[::1] ratings,
    double global_mean,
    double[::1] user_bias,
    double[::1] item_bias,
    double[:, ::1] user_factors,
    double[:, ::1] item_factors,
    double lr,
    double reg,
):
    cdef Py_ssize_t rank = user_factors.shape[1]
    cdef Py_ssize_t e, u, i, f
    cdef double err, pred, uf
    for e in range(users.shape[0]):
        u = users[e]
        i = items[e]
        pred = global_mean + user_bias[u] + item_bias[i]
        for f in range(rank):
            pred += user_factors[u, f] * item_factors[i, f]
        err = ratings[e] - pred
        user_bias[u] += lr * (err - reg * user_bias[u])
        item_bias[i] += lr * (err - reg * item_bias[i])
        for f in range(rank):
            uf = user_factors[u, f]
            user_factors[u, f] += lr * (err * item_factors[i, f] - reg * uf)
            item_factors[i, f] += lr * (err * uf - reg * item_factors[i, f])
