"""Shilling (push) attack profile generation and injection.

An attack adds synthetic users who rate a small target set at the maximum
and camouflage themselves with filler ratings. Three filler strategies are
implemented: 'random' centers filler draws on the global mean, 'average'
on each filler item's own mean, and 'bandwagon' behaves like 'random' but
additionally rates a popular-item set at the maximum. Filler values are
normal draws with standard deviation 1.1, rounded to the nearest integer
and clamped to the rating scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import NoRatingsError, RatingMatrix

STRATEGIES = ("random", "average", "bandwagon")
FILLER_SIGMA = 1.1
DEFAULT_TARGET_COUNT = 20
DEFAULT_POPULAR_COUNT = 10


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of one shilling attack.

    attack_size    injected profiles as a fraction of genuine users
    filler_size    filler items per profile; None = average genuine profile
                   length at generation time
    target_items   pushed items; None = sample ``target_count`` rated items
    popular_items  bandwagon only; None = top ``popular_count`` by rating
                   count (targets excluded)
    """

    strategy: str = "average"
    attack_size: float = 1.0
    filler_size: int | None = None
    target_items: tuple[int, ...] | None = None
    target_count: int = DEFAULT_TARGET_COUNT
    popular_items: tuple[int, ...] | None = None
    popular_count: int = DEFAULT_POPULAR_COUNT
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.attack_size <= 0:
            raise ValueError("attack_size must be positive")
        if self.filler_size is not None and self.filler_size < 0:
            raise ValueError("filler_size must be >= 0")
        if self.target_items is not None and len(self.target_items) == 0:
            raise ValueError("target_items must be nonempty when given")


@dataclass(frozen=True)
class AttackProfileSet:
    """Generated attacker profiles plus the fully resolved spec.

    ``items[indptr[t]:indptr[t+1]]`` and the matching ``ratings`` slice are
    profile t's entries. ``raw_filler_values`` (kept when requested) holds
    the unrounded, unclamped filler draws aligned with ``items``; target and
    popular positions carry NaN there.
    """

    spec: AttackSpec
    indptr: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    raw_filler_values: np.ndarray | None = None

    @property
    def n_profiles(self) -> int:
        return int(self.indptr.size - 1)

    def profile(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[t], self.indptr[t + 1]
        return self.items[lo:hi], self.ratings[lo:hi]


def select_targets(ratings: RatingMatrix, count: int = DEFAULT_TARGET_COUNT, seed: int = 0) -> list[int]:
    """Uniform sample (without replacement) of items having >= 1 rating."""
    eligible = np.flatnonzero(ratings.item_rating_counts() > 0)
    if count > eligible.size:
        raise ValueError(f"cannot select {count} targets from {eligible.size} rated items")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(eligible, size=count, replace=False)
    return sorted(int(i) for i in chosen)


def popular_items(ratings: RatingMatrix, count: int, exclude=()) -> list[int]:
    """The ``count`` most-rated items, ties to the lower index, minus exclusions."""
    counts = ratings.item_rating_counts().astype(np.int64)
    order = np.lexsort((np.arange(ratings.n), -counts))
    out = []
    banned = set(exclude)
    for i in order:
        if int(i) in banned or counts[i] == 0:
            continue
        out.append(int(i))
        if len(out) == count:
            break
    return out


def _filler_centers(spec: AttackSpec, ratings: RatingMatrix, items: np.ndarray) -> np.ndarray:
    overall = ratings.global_mean()
    if spec.strategy != "average":
        return np.full(items.size, overall)
    centers = np.empty(items.size)
    for pos, item in enumerate(items):
        try:
            centers[pos] = ratings.item_mean(int(item))
        except NoRatingsError:
            centers[pos] = overall
    return centers


def resolve(spec: AttackSpec, ratings: RatingMatrix) -> AttackSpec:
    """Fill in defaulted fields (targets, popular set, filler size)."""
    targets = spec.target_items
    if targets is None:
        targets = tuple(select_targets(ratings, spec.target_count, seed=spec.seed))
    pop: tuple[int, ...] = ()
    if spec.strategy == "bandwagon":
        pop = spec.popular_items
        if pop is None:
            pop = tuple(popular_items(ratings, spec.popular_count, exclude=targets))
    filler = spec.filler_size
    if filler is None:
        filler = int(round(ratings.n_entries / max(ratings.m, 1)))
    return replace(
        spec,
        target_items=tuple(targets),
        popular_items=tuple(pop),
        filler_size=filler,
    )


def generate(spec: AttackSpec, ratings: RatingMatrix, keep_raw: bool = False) -> AttackProfileSet:
    """Generate round(attack_size * m) push profiles, deterministic per seed.

    Every profile rates every target (and, for bandwagon, every popular
    item) at the maximum and exactly ``filler_size`` filler items sampled
    uniformly from the rest.
    """
    spec = resolve(spec, ratings)
    targets = np.array(spec.target_items, dtype=np.int64)
    pop = np.array(spec.popular_items, dtype=np.int64)
    if targets.min() < 0 or targets.max() >= ratings.n:
        raise ValueError("target item out of range")
    excluded = np.concatenate([targets, pop])
    eligible = np.setdiff1d(np.arange(ratings.n, dtype=np.int64), excluded)
    if spec.filler_size > eligible.size:
        raise ValueError(
            f"filler_size {spec.filler_size} exceeds the {eligible.size} non-target items"
        )

    n_profiles = int(round(spec.attack_size * ratings.m))
    rng = np.random.default_rng(spec.seed)
    max_r = ratings.scale.max_rating
    per_profile = targets.size + pop.size + spec.filler_size

    indptr = np.arange(n_profiles + 1, dtype=np.int64) * per_profile
    items = np.empty(n_profiles * per_profile, dtype=np.int64)
    values = np.empty(n_profiles * per_profile, dtype=np.int64)
    raw = np.full(n_profiles * per_profile, np.nan) if keep_raw else None

    fixed = np.concatenate([targets, pop])
    for t in range(n_profiles):
        lo = indptr[t]
        items[lo : lo + fixed.size] = fixed
        values[lo : lo + fixed.size] = max_r
        fillers = rng.choice(eligible, size=spec.filler_size, replace=False)
        centers = _filler_centers(spec, ratings, fillers)
        draws = rng.normal(centers, FILLER_SIGMA)
        rounded = np.clip(np.rint(draws), ratings.scale.min_rating, max_r).astype(np.int64)
        items[lo + fixed.size : lo + per_profile] = fillers
        values[lo + fixed.size : lo + per_profile] = rounded
        if keep_raw:
            raw[lo + fixed.size : lo + per_profile] = draws

    return AttackProfileSet(spec=spec, indptr=indptr, items=items, ratings=values, raw_filler_values=raw)


def inject(ratings: RatingMatrix, profiles: AttackProfileSet) -> RatingMatrix:
    """Append attacker rows; genuine entries are untouched.

    The injected users take indices m .. m + profiles - 1 and are recorded
    in ``attacker_users`` for harness-side leakage checks; recommenders
    never read that field.
    """
    a = profiles.n_profiles
    if a == 0:
        return ratings
    attacker_rows = np.repeat(np.arange(a, dtype=np.int64), np.diff(profiles.indptr)) + ratings.m
    users = np.concatenate([ratings.users, attacker_rows])
    items = np.concatenate([ratings.items, profiles.items])
    values = np.concatenate([ratings.ratings, profiles.ratings])
    ext_users = list(ratings.ext_user_ids) + [f"attacker:{t}" for t in range(a)]
    return RatingMatrix(
        ratings.m + a,
        ratings.n,
        users,
        items,
        values,
        scale=ratings.scale,
        ext_user_ids=ext_users,
        ext_item_ids=ratings.ext_item_ids,
        attacker_users=frozenset(range(ratings.m, ratings.m + a)) | ratings.attacker_users,
    )


def export_profiles(profiles: AttackProfileSet, path, fmt: str = "tsv") -> None:
    """Write profiles in the rating text format with synthetic user ids."""
    sep = "\t" if fmt == "tsv" else ","
    with open(path, "w", encoding="utf-8") as fh:
        for t in range(profiles.n_profiles):
            items, values = profiles.profile(t)
            for i, r in zip(items, values):
                fh.write(f"attacker:{t}{sep}{i}{sep}{r}\n")


def export_attack_metadata(matrix: RatingMatrix, path) -> None:
    """Sidecar listing the injected users' internal indices."""
    with open(path, "w", encoding="utf-8") as fh:
        for j in sorted(matrix.attacker_users):
            fh.write(f"{j}\n")
