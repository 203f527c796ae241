"""Reference recommenders sharing the Recommender contract.

Neighborhood methods (user kNN, item kNN, Slope One) and two factorization
methods (biased SGD matrix factorization, nonnegative matrix factorization
with multiplicative updates). All predictions are clamped to the rating
scale and every method carries a total fallback chain for cold pairs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .data import RatingMatrix
from .recommender import FitDivergedError, Recommender


def _dense_views(train: RatingMatrix):
    """(values, indicator) dense arrays; missing entries are zero."""
    r = np.zeros((train.m, train.n))
    b = np.zeros((train.m, train.n))
    r[train.users, train.items] = train.ratings
    b[train.users, train.items] = 1.0
    return r, b


def _axis_means(train: RatingMatrix, axis: str, fill: float) -> np.ndarray:
    if axis == "users":
        counts = np.diff(train.user_indptr)
        sums = np.bincount(train.users, weights=train.ratings, minlength=train.m)
    else:
        counts = np.diff(train.item_indptr)
        sums = np.bincount(train.items, weights=train.ratings, minlength=train.n)
    means = np.full(counts.size, fill)
    rated = counts > 0
    means[rated] = sums[rated] / counts[rated]
    return means


class UserKNN(Recommender):
    """User-based collaborative filtering with Pearson-weighted deviations.

    Similarity is the Pearson correlation of mean-centered ratings over
    co-rated items (at least two required). The prediction is the user's
    mean plus the similarity-weighted mean deviation of the k most similar
    raters of the item; falls back to the user mean, then the global mean.
    """

    name = "user_knn"

    def __init__(self, k: int = 20):
        self.k = k

    @property
    def hyperparameters(self) -> dict:
        return {"k": self.k}

    def fit(self, train: RatingMatrix) -> None:
        self.train = train
        self.global_mean = train.global_mean()
        self.user_means = _axis_means(train, "users", self.global_mean)
        r, b = _dense_views(train)
        centered = (r - self.user_means[:, None]) * b
        num = centered @ centered.T
        sq = (centered * centered) @ b.T
        cnt = b @ b.T
        valid = (cnt >= 2) & (sq > 0) & (sq.T > 0)
        np.fill_diagonal(valid, False)
        sim = np.full((train.m, train.m), -np.inf)
        den = np.sqrt(sq * sq.T, where=valid, out=np.ones_like(sq))
        sim[valid] = num[valid] / den[valid]
        self.sim = sim

    def _fallback(self, user: int) -> float:
        lo, hi = self.train.user_indptr[user], self.train.user_indptr[user + 1]
        return float(self.user_means[user]) if hi > lo else self.global_mean

    def predict(self, user: int, item: int) -> float:
        raters, rvals = self.train.item_cols(item)
        keep = raters != user
        raters, rvals = raters[keep], rvals[keep]
        sims = self.sim[user, raters]
        finite = np.isfinite(sims)
        value = self._fallback(user)
        if finite.any():
            raters, rvals, sims = raters[finite], rvals[finite], sims[finite]
            order = np.lexsort((raters, -sims))[: self.k]
            weight = np.abs(sims[order]).sum()
            if weight > 0:
                dev = rvals[order] - self.user_means[raters[order]]
                value = self.user_means[user] + float(sims[order] @ dev) / weight
        return float(np.clip(value, self.train.scale.min_rating, self.train.scale.max_rating))


class ItemKNN(Recommender):
    """Item-based collaborative filtering with adjusted-cosine similarity.

    Ratings are centered by user mean; item-item similarity is the cosine
    over co-raters (at least two). Prediction is the similarity-weighted
    average of the user's own ratings on the k most similar items; falls
    back to the item mean, then the global mean.
    """

    name = "item_knn"

    def __init__(self, k: int = 20):
        self.k = k

    @property
    def hyperparameters(self) -> dict:
        return {"k": self.k}

    def fit(self, train: RatingMatrix) -> None:
        self.train = train
        self.global_mean = train.global_mean()
        self.item_means = _axis_means(train, "items", self.global_mean)
        user_means = _axis_means(train, "users", self.global_mean)
        r, b = _dense_views(train)
        centered = (r - user_means[:, None]) * b
        num = centered.T @ centered
        sq = (centered * centered).T @ b
        cnt = b.T @ b
        valid = (cnt >= 2) & (sq > 0) & (sq.T > 0)
        np.fill_diagonal(valid, False)
        sim = np.full((train.n, train.n), -np.inf)
        den = np.sqrt(sq * sq.T, where=valid, out=np.ones_like(sq))
        sim[valid] = num[valid] / den[valid]
        self.sim = sim

    def _fallback(self, item: int) -> float:
        lo, hi = self.train.item_indptr[item], self.train.item_indptr[item + 1]
        return float(self.item_means[item]) if hi > lo else self.global_mean

    def predict(self, user: int, item: int) -> float:
        rated, rvals = self.train.user_rows(user)
        keep = rated != item
        rated, rvals = rated[keep], rvals[keep]
        sims = self.sim[item, rated]
        finite = np.isfinite(sims)
        value = self._fallback(item)
        if finite.any():
            rated, rvals, sims = rated[finite], rvals[finite], sims[finite]
            order = np.lexsort((rated, -sims))[: self.k]
            weight = np.abs(sims[order]).sum()
            if weight > 0:
                value = float(sims[order] @ rvals[order]) / weight
        return float(np.clip(value, self.train.scale.min_rating, self.train.scale.max_rating))


class SlopeOne(Recommender):
    """Weighted Slope One over average pairwise item deviations."""

    name = "slope_one"

    def fit(self, train: RatingMatrix) -> None:
        self.train = train
        self.global_mean = train.global_mean()
        self.item_means = _axis_means(train, "items", self.global_mean)
        r, b = _dense_views(train)
        self.counts = b.T @ b
        diff = r.T @ b - b.T @ r
        self.dev = np.divide(diff, self.counts, out=np.zeros_like(diff), where=self.counts > 0)

    def _fallback(self, item: int) -> float:
        lo, hi = self.train.item_indptr[item], self.train.item_indptr[item + 1]
        return float(self.item_means[item]) if hi > lo else self.global_mean

    def predict(self, user: int, item: int) -> float:
        rated, rvals = self.train.user_rows(user)
        keep = rated != item
        rated, rvals = rated[keep], rvals[keep]
        value = self._fallback(item)
        if rated.size:
            c = self.counts[item, rated]
            mask = c > 0
            if mask.any():
                weight = c[mask].sum()
                value = float(c[mask] @ (self.dev[item, rated[mask]] + rvals[mask])) / weight
        return float(np.clip(value, self.train.scale.min_rating, self.train.scale.max_rating))


class RegSVD(Recommender):
    """Biased latent-factor model trained by SGD on observed squared error.

    prediction = global mean + user bias + item bias + u . v, clamped.
    Rank 0 degrades to the pure bias model. Training aborts with
    FitDivergedError if the loss stops being finite.
    """

    name = "reg_svd"

    def __init__(self, rank: int = 10, lr: float = 0.005, reg: float = 0.02, epochs: int = 100, seed: int = 0):
        self.rank = rank
        self.lr = lr
        self.reg = reg
        self.epochs = epochs
        self.seed = seed

    @property
    def hyperparameters(self) -> dict:
        return {"rank": self.rank, "lr": self.lr, "reg": self.reg, "epochs": self.epochs, "seed": self.seed}

    def _loss(self, users, items, ratings) -> float:
        # overflows to inf on a diverged model; that is the detection signal
        with np.errstate(over="ignore", invalid="ignore"):
            preds = (
                self.mu
                + self.user_bias[users]
                + self.item_bias[items]
                + np.einsum("ek,ek->e", self.user_factors[users], self.item_factors[items])
            )
            err = ratings - preds
            penalty = self.reg * (
                (self.user_bias**2).sum()
                + (self.item_bias**2).sum()
                + (self.user_factors**2).sum()
                + (self.item_factors**2).sum()
            )
            return float((err**2).sum() + penalty)

    def fit(self, train: RatingMatrix) -> None:
        self.train = train
        self.mu = train.global_mean()
        rng = np.random.default_rng(self.seed)
        self.user_bias = np.zeros(train.m)
        self.item_bias = np.zeros(train.n)
        self.user_factors = rng.normal(0.0, 0.1, (train.m, self.rank))
        self.item_factors = rng.normal(0.0, 0.1, (train.n, self.rank))
        users = np.ascontiguousarray(train.users, dtype=np.int64)
        items = np.ascontiguousarray(train.items, dtype=np.int64)
        ratings = np.ascontiguousarray(train.ratings, dtype=np.float64)
        self.loss_history = []
        for epoch in range(self.epochs):
            order = rng.permutation(users.size)
            kernels.sgd_epoch(
                np.ascontiguousarray(users[order]),
                np.ascontiguousarray(items[order]),
                np.ascontiguousarray(ratings[order]),
                self.mu,
                self.user_bias,
                self.item_bias,
                self.user_factors,
                self.item_factors,
                self.lr,
                self.reg,
            )
            loss = self._loss(users, items, ratings)
            if not np.isfinite(loss):
                raise FitDivergedError(
                    f"{self.name}: non-finite loss at epoch {epoch + 1} "
                    f"(rank={self.rank}, lr={self.lr}, reg={self.reg})"
                )
            self.loss_history.append(loss)

    def predict(self, user: int, item: int) -> float:
        value = (
            self.mu
            + self.user_bias[user]
            + self.item_bias[item]
            + float(self.user_factors[user] @ self.item_factors[item])
        )
        return float(np.clip(value, self.train.scale.min_rating, self.train.scale.max_rating))

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        values = (
            self.mu
            + self.user_bias[users]
            + self.item_bias[items]
            + np.einsum("ek,ek->e", self.user_factors[users], self.item_factors[items])
        )
        return np.clip(values, self.train.scale.min_rating, self.train.scale.max_rating)


class NMF(Recommender):
    """Nonnegative factorization of observed entries by multiplicative updates.

    Factors stay entrywise >= 1e-9; the observed squared error is
    non-increasing across epochs. Prediction is u . v clamped to the scale.
    """

    name = "nmf"
    _FLOOR = 1e-9

    def __init__(self, rank: int = 10, epochs: int = 200, seed: int = 0):
        self.rank = rank
        self.epochs = epochs
        self.seed = seed

    @property
    def hyperparameters(self) -> dict:
        return {"rank": self.rank, "epochs": self.epochs, "seed": self.seed}

    def _observed(self, factors_u, factors_v, users, items):
        return np.einsum("ek,ek->e", factors_u[users], factors_v[items])

    def fit(self, train: RatingMatrix) -> None:
        self.train = train
        mean = train.global_mean()
        rng = np.random.default_rng(self.seed)
        scale0 = 2.0 * np.sqrt(mean / max(self.rank, 1))
        self.user_factors = np.maximum(rng.uniform(0.0, scale0, (train.m, self.rank)), self._FLOOR)
        self.item_factors = np.maximum(rng.uniform(0.0, scale0, (train.n, self.rank)), self._FLOOR)
        users, items = train.users, train.items
        observed = sp.csr_matrix(
            (train.ratings.astype(np.float64), (users, items)), shape=(train.m, train.n)
        )
        observed_t = observed.T.tocsr()
        eps = 1e-12
        self.loss_history = []
        for _ in range(self.epochs):
            pred = self._observed(self.user_factors, self.item_factors, users, items)
            recon = sp.csr_matrix((pred, (users, items)), shape=(train.m, train.n))
            num = observed @ self.item_factors
            den = recon @ self.item_factors + eps
            self.user_factors = np.maximum(self.user_factors * num / den, self._FLOOR)

            pred = self._observed(self.user_factors, self.item_factors, users, items)
            recon_t = sp.csr_matrix((pred, (items, users)), shape=(train.n, train.m))
            num = observed_t @ self.user_factors
            den = recon_t @ self.user_factors + eps
            self.item_factors = np.maximum(self.item_factors * num / den, self._FLOOR)

            err = train.ratings - self._observed(self.user_factors, self.item_factors, users, items)
            self.loss_history.append(float((err**2).sum()))

    def predict(self, user: int, item: int) -> float:
        value = float(self.user_factors[user] @ self.item_factors[item])
        return float(np.clip(value, self.train.scale.min_rating, self.train.scale.max_rating))

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        values = np.einsum("ek,ek->e", self.user_factors[users], self.item_factors[items])
        return np.clip(values, self.train.scale.min_rating, self.train.scale.max_rating)
