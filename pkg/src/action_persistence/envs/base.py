from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from loguru import logger

from action_persistence.utils.exceptions import EnvironmentConfigError, EpisodeTerminatedError

if TYPE_CHECKING:
    from action_persistence.models.env import EnvSpec

Seed = int | np.random.SeedSequence | None


class StepResult(NamedTuple):
    """Outcome of one environment step."""

    next_state: np.ndarray
    reward: float
    terminal: bool


class Environment(ABC):
    """Episodic environment with a finite action set.

    ``reset`` must be called before the first ``step``; stepping after a terminal
    transition raises ``EpisodeTerminatedError``. Instances are single-owner.
    """

    def __init__(self, spec: EnvSpec):
        """Initialize the environment.

        Args:
            spec: Description of the environment.
        """
        self.spec = spec

    @abstractmethod
    def reset(self, seed: Seed = None) -> np.ndarray:
        """Start a new episode and return the initial state."""

    @abstractmethod
    def step(self, action: int) -> StepResult:
        """Apply the action with index ``action``."""


class SimulatedEnvironment(Environment):
    """Environment driven by an explicit ``(state, action) -> next state`` model.

    Subclasses implement ``_initial_state`` and ``_transition``; this class owns
    the episode bookkeeping and the random stream seeded at reset.
    """

    def __init__(self, spec: EnvSpec):
        """Initialize the environment.

        Args:
            spec: Description of the environment.
        """
        super().__init__(spec)
        self.rng = np.random.default_rng()
        self._state: np.ndarray | None = None
        self._done = True

    @property
    def state(self) -> np.ndarray | None:
        """Current state, ``None`` before the first reset."""
        return None if self._state is None else self._state.copy()

    def reset(self, seed: Seed = None, initial_state: np.ndarray | None = None) -> np.ndarray:
        """Reseed the environment stream and draw an initial state.

        Args:
            seed: Seed of the environment stream.
            initial_state: Start from this state instead of drawing one.

        Returns:
            The initial state.
        """
        self.rng = np.random.default_rng(seed)
        start = self._initial_state() if initial_state is None else initial_state
        self._state = np.array(start, dtype=float).reshape(self.spec.state_dim)
        self._done = False
        return self._state.copy()

    def step(self, action: int) -> StepResult:
        """Advance the simulation by one base timestep.

        Raises:
            EpisodeTerminatedError: If the episode already ended or never started.
            EnvironmentConfigError: If the action index is out of range.
        """
        if self._state is None or self._done:
            logger.error(f"{self.spec.name}: step called on a finished episode")
            raise EpisodeTerminatedError(f"{self.spec.name}: step called on a finished episode; call reset first")
        if not 0 <= action < self.spec.n_actions:
            raise EnvironmentConfigError(f"action index {action} out of range for {self.spec.n_actions} actions")
        next_state, reward, terminal = self._transition(self._state, int(action))
        self._state = np.asarray(next_state, dtype=float)
        self._done = bool(terminal)
        return StepResult(self._state.copy(), float(reward), self._done)

    @abstractmethod
    def _initial_state(self) -> np.ndarray:
        """Draw S_0 using ``self.rng``."""

    @abstractmethod
    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        """Return ``(next_state, reward, terminal)``."""
