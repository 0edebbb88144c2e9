from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from action_persistence.models.reports import SelectionEntry, SelectionReport
from action_persistence.utils.exceptions import SelectionError

if TYPE_CHECKING:
    from collections.abc import Mapping

    from action_persistence.models.dataset import Dataset
    from action_persistence.pfqi.algorithm import PersistenceRun
    from action_persistence.regress.qfunction import QFunction


def estimate_return(q: QFunction, initial_states: np.ndarray) -> float:
    """Mean over initial states of ``max_a q(s, a)``.

    Raises:
        SelectionError: If no initial state is given.
    """
    states = np.asarray(initial_states, dtype=float)
    if states.size == 0:
        raise SelectionError("estimate_return needs at least one initial state")
    return float(q.values(np.atleast_2d(states)).max(axis=1).mean())


def empirical_bellman_residual(q: QFunction, q_tilde: QFunction, dataset: Dataset) -> float:
    """Mean absolute difference ``|q_tilde(S, A) - q(S, A)|`` over the dataset's visited pairs.

    Raises:
        SelectionError: If the dataset is empty.
    """
    if dataset.n_samples == 0:
        raise SelectionError("empirical_bellman_residual needs a nonempty dataset")
    arrays = dataset.arrays
    difference = q_tilde.evaluate(arrays.states, arrays.actions) - q.evaluate(arrays.states, arrays.actions)
    return float(np.mean(np.abs(difference)))


def select_persistence(
    runs: Mapping[int, PersistenceRun],
    dataset: Dataset,
    gamma: float | None = None,
) -> SelectionReport:
    """Pick the persistence maximizing ``B_k = J_hat_k - residual_k / (1 - gamma^k)``.

    ``J_hat_k`` is estimated on the dataset's trajectory heads and the residual
    compares Q^(J) with the continuation Q^(J+k). Ties go to the smaller k.

    Args:
        runs: PFQI runs keyed by persistence, all trained on ``dataset`` with continuation.
        dataset: The shared training dataset.
        gamma: Base discount; the dataset discount if None.

    Returns:
        The per-k entries and the chosen persistence.

    Raises:
        SelectionError: If there are no runs, a run used another dataset or lacks its continuation.
    """
    if not runs:
        raise SelectionError("select_persistence needs at least one run")
    gamma = dataset.discount if gamma is None else gamma
    entries = []
    for k, run in sorted(runs.items()):
        if run.dataset_fingerprint != dataset.fingerprint:
            logger.error(f"Run k={k} was trained on a different dataset")
            raise SelectionError(f"run k={k} was trained on a different dataset")
        if run.continuation_q is None:
            raise SelectionError(f"run k={k} has no continuation Q^(J+k)")
        j_hat = estimate_return(run.final_q, dataset.initial_states)
        residual = empirical_bellman_residual(run.final_q, run.continuation_q, dataset)
        entries.append(SelectionEntry(k=k, j_hat=j_hat, residual=residual, index=j_hat - residual / (1.0 - gamma**k)))
    chosen = max(entries, key=lambda entry: (entry.index, -entry.k)).k
    logger.info(f"Selected persistence k={chosen} among {[entry.k for entry in entries]}")
    return SelectionReport(entries=entries, chosen=chosen)


def performance_loss(evals: Mapping[int, float], chosen: int) -> float:
    """Gap between the best measured return and the return of the chosen persistence.

    Raises:
        SelectionError: If ``chosen`` has no measured return.
    """
    if chosen not in evals:
        raise SelectionError(f"no measured return for the chosen persistence k={chosen}")
    return float(max(evals.values()) - evals[chosen])
