"""Synthetic rating data with realistic marginals.

Used by protocol tests and the kernel benchmark. Every item carries a
latent quality level and every user a bias; both are expressed as peaked
probability profiles over the rating levels, and each observed rating is
drawn from the normalized product of the two profiles. The result has the
kind of predictable structure (item means, user biases, neighborhoods)
that real rating logs show, with skewed item popularity and user activity.
"""

from __future__ import annotations

import numpy as np

from .data import RatingMatrix, RatingScale


def _peaked_profiles(levels: np.ndarray, centers: np.ndarray, widths: np.ndarray) -> np.ndarray:
    logits = -((levels[None, :] - centers[:, None]) ** 2) / (2.0 * widths[:, None] ** 2)
    profiles = np.exp(logits)
    return profiles / profiles.sum(axis=1, keepdims=True)


def synthetic_ratings(
    m: int,
    n: int,
    n_entries: int,
    seed: int = 0,
    scale: RatingScale = RatingScale(),
) -> RatingMatrix:
    """Sample a sparse rating matrix with planted user/item structure."""
    if n_entries > m * n:
        raise ValueError("more entries requested than cells available")
    rng = np.random.default_rng(seed)
    levels = scale.level_values()
    mid = levels.mean()
    span = levels[-1] - levels[0]

    item_quality = np.clip(rng.normal(mid + 0.1 * span, 0.22 * span, n), levels[0], levels[-1])
    item_width = rng.uniform(0.18 * span, 0.32 * span, n)
    user_center = np.clip(mid + rng.normal(0.0, 0.15 * span, m), levels[0], levels[-1])
    user_width = rng.uniform(0.22 * span, 0.40 * span, m)
    item_profiles = _peaked_profiles(levels, item_quality, item_width)
    user_profiles = _peaked_profiles(levels, user_center, user_width)

    user_weight = rng.pareto(1.5, m) + 1.0
    item_weight = rng.pareto(1.2, n) + 1.0
    user_weight /= user_weight.sum()
    item_weight /= item_weight.sum()

    chosen: dict[int, None] = {}
    while len(chosen) < n_entries:
        need = n_entries - len(chosen)
        draw_u = rng.choice(m, size=2 * need + 8, p=user_weight)
        draw_i = rng.choice(n, size=2 * need + 8, p=item_weight)
        for u, i in zip(draw_u, draw_i):
            key = int(u) * n + int(i)
            if key not in chosen:
                chosen[key] = None
                if len(chosen) == n_entries:
                    break

    keys = np.fromiter(chosen.keys(), dtype=np.int64, count=n_entries)
    users = keys // n
    items = keys % n
    probs = user_profiles[users] * item_profiles[items]
    probs /= probs.sum(axis=1, keepdims=True)
    cumulative = probs.cumsum(axis=1)
    draws = rng.random(n_entries)
    picked = (draws[:, None] < cumulative).argmax(axis=1)
    ratings = picked + scale.min_rating
    return RatingMatrix(m, n, users, items, ratings, scale=scale)
