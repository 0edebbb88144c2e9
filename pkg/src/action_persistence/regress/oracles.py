from __future__ import annotations

from typing import Any, ClassVar

import numpy as np
from loguru import logger

from action_persistence.regress.base import Regressor
from action_persistence.utils.exceptions import RegressionError


class TableRegressor(Regressor):
    """Exact lookup regressor for finite state spaces.

    Every distinct feature row is a key whose prediction is the mean of its
    targets. Rows never seen during fitting fall back to the mean of all targets,
    which keeps predictions inside the training-target range. On a dataset that
    covers every state, PFQI with this regressor is exact value iteration.
    """

    KIND: ClassVar[str] = "table"

    def __init__(self) -> None:
        """Initialize an empty table."""
        self.table_: dict[tuple[float, ...], float] = {}
        self.default_: float = 0.0

    def fit(self, X: np.ndarray, y: np.ndarray) -> TableRegressor:
        """Average the targets of every distinct feature row."""
        X, y = self._validate_training_data(X, y)
        keys, inverse = np.unique(X, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        sums = np.bincount(inverse, weights=y, minlength=keys.shape[0])
        counts = np.bincount(inverse, minlength=keys.shape[0])
        self.table_ = {tuple(key.tolist()): float(s / c) for key, s, c in zip(keys, sums, counts, strict=True)}
        self.default_ = float(y.mean())
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Look every row up, falling back to the global target mean."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.table_.get(tuple(row.tolist()), self.default_) for row in X], dtype=float)

    def to_dict(self) -> dict[str, Any]:
        """Serialize keys and values."""
        return {
            "kind": self.KIND,
            "keys": [list(key) for key in self.table_],
            "values": list(self.table_.values()),
            "default": self.default_,
        }

    @classmethod
    def _from_dict(cls, document: dict[str, Any]) -> TableRegressor:
        regressor = cls()
        regressor.table_ = {
            tuple(float(x) for x in key): float(value)
            for key, value in zip(document["keys"], document["values"], strict=True)
        }
        regressor.default_ = float(document["default"])
        return regressor


class KNeighborsRegressor(Regressor):
    """Brute-force k-nearest-neighbor regressor (Euclidean, uniform weights).

    Distance ties are resolved toward the training row with the lowest index.
    """

    KIND: ClassVar[str] = "knn"

    def __init__(self, n_neighbors: int = 5):
        """Initialize the regressor.

        Args:
            n_neighbors: Number of neighbors averaged per prediction.
        """
        if n_neighbors < 1:
            raise RegressionError(f"n_neighbors must be >= 1, got {n_neighbors}")
        self.n_neighbors = n_neighbors
        self.X_: np.ndarray | None = None
        self.y_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> KNeighborsRegressor:
        """Store the training set."""
        self.X_, self.y_ = self._validate_training_data(X, y)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Average the targets of the nearest training rows."""
        if self.X_ is None or self.y_ is None:
            logger.error("KNeighborsRegressor must be fitted before predicting")
            raise RegressionError("KNeighborsRegressor must be fitted before predicting")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_neighbors = min(self.n_neighbors, self.X_.shape[0])
        distances = np.sum((X[:, None, :] - self.X_[None, :, :]) ** 2, axis=2)
        nearest = np.argsort(distances, axis=1, kind="stable")[:, :n_neighbors]
        return self.y_[nearest].mean(axis=1)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the stored training set."""
        return {
            "kind": self.KIND,
            "n_neighbors": self.n_neighbors,
            "X": [] if self.X_ is None else self.X_.tolist(),
            "y": [] if self.y_ is None else self.y_.tolist(),
        }

    @classmethod
    def _from_dict(cls, document: dict[str, Any]) -> KNeighborsRegressor:
        regressor = cls(n_neighbors=int(document["n_neighbors"]))
        if document["y"]:
            regressor.X_ = np.asarray(document["X"], dtype=float)
            regressor.y_ = np.asarray(document["y"], dtype=float)
        return regressor
