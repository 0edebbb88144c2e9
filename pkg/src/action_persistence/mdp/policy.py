from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import PolicyError

if TYPE_CHECKING:
    from action_persistence.regress.qfunction import QFunction


class DiscretePolicy(ABC):
    """Markovian stationary policy over a finite action set."""

    def __init__(self, n_actions: int):
        """Initialize the policy.

        Args:
            n_actions: Number of actions.
        """
        self.n_actions = n_actions

    @abstractmethod
    def act(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Select an action index in ``state``."""


class UniformPolicy(DiscretePolicy):
    """Uniform random policy over the action set."""

    def act(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Draw an action uniformly at random."""
        return int(rng.integers(self.n_actions))


class TabularPolicy(DiscretePolicy):
    """Stochastic (or deterministic) table ``pi[s, a]`` over a finite state space.

    States are one-element vectors holding the state index. Every decision
    consumes exactly one uniform draw from ``rng``, so deterministic and stochastic
    tables advance random streams identically.
    """

    def __init__(self, probabilities: np.ndarray):
        """Initialize the policy.

        Args:
            probabilities: Array of shape (n_states, n_actions) with rows summing to 1.

        Raises:
            PolicyError: If a row is not a probability distribution.
        """
        probabilities = np.array(probabilities, dtype=float)
        if probabilities.ndim != 2 or np.any(probabilities < 0.0):
            logger.error("Policy table must be a non-negative 2-D array")
            raise PolicyError("Policy table must be a non-negative 2-D array")
        if not np.allclose(probabilities.sum(axis=1), 1.0, rtol=0.0, atol=Constants.PROBABILITY_ATOL):
            logger.error("Policy rows must sum to 1")
            raise PolicyError("Policy rows must sum to 1")
        super().__init__(probabilities.shape[1])
        probabilities.setflags(write=False)
        self.probabilities = probabilities

    @classmethod
    def deterministic(cls, actions: np.ndarray | list[int], n_actions: int) -> TabularPolicy:
        """Build the policy playing ``actions[s]`` in state ``s``."""
        actions = np.asarray(actions, dtype=int)
        table = np.zeros((actions.shape[0], n_actions))
        table[np.arange(actions.shape[0]), actions] = 1.0
        return cls(table)

    @property
    def n_states(self) -> int:
        """Number of states."""
        return int(self.probabilities.shape[0])

    def act(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Sample from the row of the state index."""
        row = self.probabilities[int(np.ravel(state)[0])]
        draw = rng.random()
        return int(min(np.searchsorted(np.cumsum(row), draw, side="right"), self.n_actions - 1))


class GreedyPolicy(DiscretePolicy):
    """Greedy policy with respect to a Q-function; ties go to the lowest action index."""

    def __init__(self, q: QFunction):
        """Initialize the policy.

        Args:
            q: Q-function to act greedily on.
        """
        super().__init__(q.n_actions)
        self.q = q

    def act(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Return ``argmax_a Q(state, a)``."""
        return int(np.argmax(self.q.values(np.atleast_2d(np.asarray(state, dtype=float)))[0]))

    def actions(self, states: np.ndarray) -> np.ndarray:
        """Greedy actions for a batch of states."""
        return np.argmax(self.q.values(np.atleast_2d(np.asarray(states, dtype=float))), axis=1)

    def as_table(self, n_states: int) -> TabularPolicy:
        """Deterministic table over the state indices ``0..n_states-1``."""
        states = np.arange(n_states, dtype=float).reshape(-1, 1)
        return TabularPolicy.deterministic(self.actions(states), self.n_actions)
