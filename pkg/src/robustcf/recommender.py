"""Shared contract for every rating predictor in the package."""

from __future__ import annotations

import abc

import numpy as np

from .data import RatingMatrix


class FitDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


class Recommender(abc.ABC):
    """A named model with fit/predict over internal user and item indices.

    After ``fit``, ``predict`` must return a value inside the rating scale
    for every (user, item) pair, cold pairs included; implementations carry
    their own fallback chains.
    """

    name: str = "recommender"

    @property
    def hyperparameters(self) -> dict:
        return {}

    @abc.abstractmethod
    def fit(self, train: RatingMatrix) -> None: ...

    @abc.abstractmethod
    def predict(self, user: int, item: int) -> float: ...

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users)
        items = np.asarray(items)
        return np.array([self.predict(int(u), int(i)) for u, i in zip(users, items)])
