"""Sparse ordinal rating data: ingestion, deterministic splitting, statistics.

Ratings are integer scores on a fixed scale (1..5 by default). A
:class:`RatingMatrix` stores the observed (user, item, rating) triples once
and exposes both a per-user and a per-item view of them. External user/item
ids from input files are compacted to dense 0-based indices at ingest; the
mapping is kept so models and reports can be tied back to the original ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SEPARATORS = {"tsv": "\t", "csv": ","}


class DataFormatError(ValueError):
    """Unparseable or inconsistent rating data."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class NoRatingsError(ValueError):
    """A statistic was requested for a user or item with no observed ratings."""


@dataclass(frozen=True)
class RatingScale:
    """Ordinal rating range [min_rating, max_rating], K = max - min + 1 levels."""

    min_rating: int = 1
    max_rating: int = 5

    def __post_init__(self):
        if self.min_rating >= self.max_rating:
            raise ValueError("rating scale needs min_rating < max_rating")

    @property
    def K(self) -> int:
        return self.max_rating - self.min_rating + 1

    def level_values(self) -> np.ndarray:
        """The rating value of each level, as floats (for expectations)."""
        return np.arange(self.min_rating, self.max_rating + 1, dtype=np.float64)

    def contains(self, rating: int) -> bool:
        return self.min_rating <= rating <= self.max_rating


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class RatingMatrix:
    """Immutable sparse m x n matrix of integer ratings.

    Entries are stored once in canonical (user, item) order; a per-item view
    is kept as a permutation of the same arrays. At most one rating per
    (user, item) pair is allowed; duplicates are a hard error so corrupted
    inputs surface at ingest rather than silently overwriting.

    ``attacker_users`` is bookkeeping for injected shilling profiles. It is
    consulted only by the evaluation harness (leakage checks); recommenders
    never see it.
    """

    def __init__(
        self,
        m: int,
        n: int,
        users,
        items,
        ratings,
        scale: RatingScale = RatingScale(),
        ext_user_ids: list[str] | None = None,
        ext_item_ids: list[str] | None = None,
        attacker_users: frozenset[int] = frozenset(),
    ):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        ratings = np.asarray(ratings, dtype=np.int64)
        if not (users.shape == items.shape == ratings.shape) or users.ndim != 1:
            raise ValueError("users, items, ratings must be 1-d arrays of equal length")
        if users.size:
            if users.min() < 0 or users.max() >= m:
                raise ValueError("user index out of range")
            if items.min() < 0 or items.max() >= n:
                raise ValueError("item index out of range")
            if ratings.min() < scale.min_rating or ratings.max() > scale.max_rating:
                raise DataFormatError("rating outside scale")

        order = np.lexsort((items, users))
        self.users = _freeze(users[order])
        self.items = _freeze(items[order])
        self.ratings = _freeze(ratings[order])
        if self.users.size > 1:
            same = (np.diff(self.users) == 0) & (np.diff(self.items) == 0)
            if same.any():
                e = int(np.flatnonzero(same)[0])
                raise DataFormatError(
                    f"duplicate rating for user {self.users[e]}, item {self.items[e]}"
                )

        self.m = int(m)
        self.n = int(n)
        self.scale = scale
        self.attacker_users = frozenset(attacker_users)
        self.ext_user_ids = list(ext_user_ids) if ext_user_ids is not None else [str(j) for j in range(m)]
        self.ext_item_ids = list(ext_item_ids) if ext_item_ids is not None else [str(i) for i in range(n)]
        if len(self.ext_user_ids) != m or len(self.ext_item_ids) != n:
            raise ValueError("external id lists must match m and n")

        self.user_indptr = _freeze(
            np.concatenate(([0], np.cumsum(np.bincount(self.users, minlength=m))))
        )
        item_order = np.lexsort((self.users, self.items))
        self.item_indptr = _freeze(
            np.concatenate(([0], np.cumsum(np.bincount(self.items, minlength=n))))
        )
        self.item_users = _freeze(self.users[item_order])
        self.item_ratings = _freeze(self.ratings[item_order])
        self.levels = _freeze(self.ratings - scale.min_rating)
        self.item_levels = _freeze(self.item_ratings - scale.min_rating)

    @property
    def n_entries(self) -> int:
        return int(self.users.size)

    def user_rows(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Items rated by user j and the ratings, in ascending item order."""
        lo, hi = self.user_indptr[j], self.user_indptr[j + 1]
        return self.items[lo:hi], self.ratings[lo:hi]

    def item_cols(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Users who rated item i and the ratings, in ascending user order."""
        lo, hi = self.item_indptr[i], self.item_indptr[i + 1]
        return self.item_users[lo:hi], self.item_ratings[lo:hi]

    def rating_of(self, j: int, i: int):
        """The rating user j gave item i, or None."""
        items, ratings = self.user_rows(j)
        pos = np.searchsorted(items, i)
        if pos < items.size and items[pos] == i:
            return int(ratings[pos])
        return None

    def global_mean(self) -> float:
        if self.n_entries == 0:
            raise NoRatingsError("empty rating matrix")
        return float(self.ratings.mean())

    def item_mean(self, i: int) -> float:
        _, ratings = self.item_cols(i)
        if ratings.size == 0:
            raise NoRatingsError(f"item {i} has no ratings")
        return float(ratings.mean())

    def user_mean(self, j: int) -> float:
        _, ratings = self.user_rows(j)
        if ratings.size == 0:
            raise NoRatingsError(f"user {j} has no ratings")
        return float(ratings.mean())

    def item_rating_counts(self) -> np.ndarray:
        return np.diff(self.item_indptr)

    def density_pct(self) -> float:
        if self.m == 0 or self.n == 0:
            return 0.0
        return 100.0 * self.n_entries / (self.m * self.n)

    def triple_multiset(self) -> set:
        """External-id triples with multiplicity (always 1), for round-trip checks."""
        return {
            (self.ext_user_ids[u], self.ext_item_ids[i], int(r))
            for u, i, r in zip(self.users, self.items, self.ratings)
        }


def parse_ratings(path, fmt: str = "tsv", scale: RatingScale = RatingScale()) -> RatingMatrix:
    """Parse a ``user <sep> item <sep> rating [<sep> timestamp]`` text file.

    Lines whose first non-blank character is ``#`` and blank lines are
    skipped. External ids are compacted to dense 0-based indices in order of
    first appearance; the timestamp column, when present, is ignored.
    """
    if fmt not in _SEPARATORS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {sorted(_SEPARATORS)}")
    sep = _SEPARATORS[fmt]
    path = Path(path)

    user_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    users, items, ratings = [], [], []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(sep)]
            if len(parts) not in (3, 4):
                raise DataFormatError(
                    f"expected 3 or 4 {fmt} fields, got {len(parts)}", line_no
                )
            try:
                rating = int(parts[2])
            except ValueError:
                raise DataFormatError(f"rating {parts[2]!r} is not an integer", line_no)
            if not scale.contains(rating):
                raise DataFormatError(
                    f"rating {rating} outside scale [{scale.min_rating}, {scale.max_rating}]",
                    line_no,
                )
            u = user_ids.setdefault(parts[0], len(user_ids))
            i = item_ids.setdefault(parts[1], len(item_ids))
            if (u, i) in seen:
                raise DataFormatError(
                    f"duplicate rating for user {parts[0]!r}, item {parts[1]!r}", line_no
                )
            seen.add((u, i))
            users.append(u)
            items.append(i)
            ratings.append(rating)

    return RatingMatrix(
        len(user_ids),
        len(item_ids),
        users,
        items,
        ratings,
        scale=scale,
        ext_user_ids=list(user_ids),
        ext_item_ids=list(item_ids),
    )


def save_ratings(ratings: RatingMatrix, path, fmt: str = "tsv") -> None:
    """Write triples back out in the input text format (external ids)."""
    sep = _SEPARATORS[fmt]
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for u, i, r in zip(ratings.users, ratings.items, ratings.ratings):
            fh.write(f"{ratings.ext_user_ids[u]}{sep}{ratings.ext_item_ids[i]}{sep}{r}\n")


def save_id_maps(ratings: RatingMatrix, directory, prefix: str = "") -> None:
    """Write ``external_id <tab> internal_index`` sidecar files per axis."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, ids in (("users", ratings.ext_user_ids), ("items", ratings.ext_item_ids)):
        with (directory / f"{prefix}{name}.map").open("w", encoding="utf-8") as fh:
            for idx, ext in enumerate(ids):
                fh.write(f"{ext}\t{idx}\n")


@dataclass(frozen=True)
class DatasetSplit:
    """Entry-level partition of one rating matrix into train/validation/test."""

    train: RatingMatrix
    validation: RatingMatrix
    test: RatingMatrix
    seed: int

    def parts(self) -> tuple[RatingMatrix, RatingMatrix, RatingMatrix]:
        return self.train, self.validation, self.test


def _largest_remainder(total: int, fractions) -> list[int]:
    quotas = [f * total for f in fractions]
    base = [math.floor(q) for q in quotas]
    leftover = total - sum(base)
    by_remainder = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in by_remainder[:leftover]:
        base[i] += 1
    return base


def split(
    ratings: RatingMatrix,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Uniform random entry-level partition, deterministic for a fixed seed.

    Part sizes follow largest-remainder rounding, so each is within one entry
    of its exact proportion. All parts keep the source dimensions and id maps
    (a user may have no entries in some part).
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions {fractions} do not sum to 1")
    if ratings.n_entries == 0:
        raise ValueError("cannot split an empty rating matrix")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(ratings.n_entries)
    sizes = _largest_remainder(ratings.n_entries, fractions)

    parts = []
    start = 0
    for size in sizes:
        idx = perm[start : start + size]
        start += size
        parts.append(
            RatingMatrix(
                ratings.m,
                ratings.n,
                ratings.users[idx],
                ratings.items[idx],
                ratings.ratings[idx],
                scale=ratings.scale,
                ext_user_ids=ratings.ext_user_ids,
                ext_item_ids=ratings.ext_item_ids,
                attacker_users=ratings.attacker_users,
            )
        )
    return DatasetSplit(parts[0], parts[1], parts[2], seed)
