from __future__ import annotations

from typing import TYPE_CHECKING, Literal

import numpy as np
from loguru import logger

from action_persistence.models.dataset import Dataset
from action_persistence.utils.exceptions import DatasetError, PersistenceError

if TYPE_CHECKING:
    from action_persistence.models.dataset import TransitionArrays
    from action_persistence.regress.qfunction import QFunction

TargetMode = Literal["optimal", "persistent"]


def compute_targets(
    q: QFunction,
    batch: Dataset | TransitionArrays,
    mode: TargetMode,
    gamma: float,
) -> np.ndarray:
    """Apply the empirical Bellman operator to ``q`` on every transition of the batch.

    ``optimal`` gives ``R + gamma * max_a q(S', a)`` and evaluates every action at
    S'; ``persistent`` gives ``R + gamma * q(S', A)`` and evaluates only the taken
    action. Terminal transitions yield ``Y = R``.

    Args:
        q: Current Q estimate.
        batch: Dataset or its column arrays.
        mode: ``optimal`` or ``persistent``.
        gamma: Discount factor.

    Returns:
        One target per transition.

    Raises:
        DatasetError: If the batch is empty.
    """
    arrays = batch.arrays if isinstance(batch, Dataset) else batch
    if len(arrays) == 0:
        logger.error("Cannot compute targets on an empty batch")
        raise DatasetError("cannot compute targets on an empty batch")
    if mode == "optimal":
        bootstrap = q.values(arrays.next_states).max(axis=1)
    elif mode == "persistent":
        bootstrap = q.evaluate(arrays.next_states, arrays.actions)
    else:
        raise PersistenceError(f"unknown target mode {mode!r}")
    return arrays.rewards + gamma * np.where(arrays.terminals, 0.0, bootstrap)


def predicted_op_count(iterations: int, n_samples: int, n_actions: int, k: int) -> int:
    """Number of Q evaluations in the target phase of J PFQI iterations.

    ``(J / k) * n * |A|`` for the optimal iterations plus ``J (k - 1) / k * n`` for
    the persistent ones.

    Raises:
        PersistenceError: If k < 1, J < 1 or J is not a multiple of k.
    """
    if k < 1 or iterations < 1:
        raise PersistenceError(f"J and k must be >= 1, got J={iterations}, k={k}")
    if iterations % k != 0:
        raise PersistenceError(f"iterations J={iterations} must be a multiple of persistence k={k}")
    optimal_iterations = iterations // k
    return optimal_iterations * n_samples * n_actions + (iterations - optimal_iterations) * n_samples
