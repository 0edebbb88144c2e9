from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

import numpy as np
from loguru import logger

from action_persistence.regress import extra_trees, oracles  # noqa: F401  (registers regressor kinds)
from action_persistence.regress.base import ConstantRegressor, Regressor
from action_persistence.utils.exceptions import RegressionError


class QFunction(ABC):
    """Evaluable action-value function over a finite action set.

    States are always passed as a 2-D array with one state vector per row.
    """

    def __init__(self, n_actions: int):
        """Initialize the Q-function.

        Args:
            n_actions: Number of actions.
        """
        if n_actions < 1:
            raise RegressionError(f"n_actions must be >= 1, got {n_actions}")
        self.n_actions = n_actions

    @abstractmethod
    def values(self, states: np.ndarray) -> np.ndarray:
        """Q-values of every action, shape (n, n_actions)."""

    def evaluate(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Q-values of the given action in each state, shape (n,)."""
        actions = self._validate_actions(actions)
        return self.values(states)[np.arange(actions.shape[0]), actions]

    def predict(self, state: np.ndarray, action: int) -> float:
        """Q-value of a single state-action pair.

        Raises:
            RegressionError: If ``action`` is not a valid action index.
        """
        return float(self.evaluate(np.atleast_2d(np.asarray(state, dtype=float)), np.array([action]))[0])

    def _validate_actions(self, actions: np.ndarray) -> np.ndarray:
        actions = np.asarray(actions, dtype=int).ravel()
        if actions.size and (actions.min() < 0 or actions.max() >= self.n_actions):
            logger.error(f"Action index out of range for {self.n_actions} actions")
            raise RegressionError(f"Action index out of range for {self.n_actions} actions")
        return actions

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serialize to a JSON-compatible document."""


class ZeroQ(QFunction):
    """The initial estimate Q^(0) ≡ 0."""

    def values(self, states: np.ndarray) -> np.ndarray:
        """Zeros for every action."""
        return np.zeros((np.atleast_2d(states).shape[0], self.n_actions))

    def to_dict(self) -> dict[str, Any]:
        """Serialize."""
        return {"kind": "zero", "n_actions": self.n_actions}


class TabularQ(QFunction):
    """Dense table Q[s, a]; states are one-element vectors holding the state index."""

    def __init__(self, table: np.ndarray):
        """Initialize the table.

        Args:
            table: Array of shape (n_states, n_actions) with finite entries.
        """
        table = np.array(table, dtype=float)
        if table.ndim != 2 or not np.all(np.isfinite(table)):
            raise RegressionError("a tabular Q-function needs a finite 2-D table")
        super().__init__(table.shape[1])
        table.setflags(write=False)
        self.table = table

    @property
    def n_states(self) -> int:
        """Number of states."""
        return int(self.table.shape[0])

    def values(self, states: np.ndarray) -> np.ndarray:
        """Rows of the table indexed by the state index in column 0."""
        indices = np.asarray(np.atleast_2d(states)[:, 0], dtype=int)
        return self.table[indices]

    def to_dict(self) -> dict[str, Any]:
        """Serialize."""
        return {"kind": "tabular", "table": self.table.tolist()}


class FittedQ(QFunction):
    """Q-function with one fitted regressor per action."""

    def __init__(self, models: list[Regressor], feature_dim: int):
        """Initialize the Q-function.

        Args:
            models: One fitted regressor per action index.
            feature_dim: Size of the state feature vectors.
        """
        super().__init__(len(models))
        self.models = models
        self.feature_dim = feature_dim

    @classmethod
    def zeros(cls, n_actions: int, feature_dim: int) -> FittedQ:
        """Zero-initialized Q^(0)."""
        return cls([ConstantRegressor(0.0) for _ in range(n_actions)], feature_dim)

    def values(self, states: np.ndarray) -> np.ndarray:
        """Predictions of every per-action regressor."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return np.column_stack([model.predict(states) for model in self.models])

    def evaluate(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Query each regressor only on the rows asking for its action."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = self._validate_actions(actions)
        result = np.empty(actions.shape[0])
        for action, model in enumerate(self.models):
            rows = actions == action
            if rows.any():
                result[rows] = model.predict(states[rows])
        return result

    def to_dict(self) -> dict[str, Any]:
        """Serialize every per-action regressor."""
        return {
            "kind": "fitted",
            "feature_dim": self.feature_dim,
            "models": [model.to_dict() for model in self.models],
        }


class CountingQFunction(QFunction):
    """Wrapper counting the number of state-action evaluations."""

    def __init__(self, inner: QFunction):
        """Initialize the wrapper.

        Args:
            inner: Q-function to delegate to.
        """
        super().__init__(inner.n_actions)
        self.inner = inner
        self.count = 0

    def values(self, states: np.ndarray) -> np.ndarray:
        """Delegate, counting n * |A| evaluations."""
        result = self.inner.values(states)
        self.count += int(result.size)
        return result

    def evaluate(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Delegate, counting n evaluations."""
        result = self.inner.evaluate(states, actions)
        self.count += int(result.size)
        return result

    def to_dict(self) -> dict[str, Any]:
        """Serialize the wrapped Q-function."""
        return self.inner.to_dict()


def load_q_function(document: dict[str, Any]) -> QFunction:
    """Rebuild a Q-function from its serialized document.

    Raises:
        RegressionError: If the document kind is unknown.
    """
    kind = document.get("kind")
    if kind == "zero":
        return ZeroQ(int(document["n_actions"]))
    if kind == "tabular":
        return TabularQ(np.asarray(document["table"], dtype=float))
    if kind == "fitted":
        return FittedQ([Regressor.from_dict(model) for model in document["models"]], int(document["feature_dim"]))
    raise RegressionError(f"Unknown Q-function kind: {kind}")
