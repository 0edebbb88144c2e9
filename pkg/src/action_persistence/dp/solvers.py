from __future__ import annotations

from collections.abc import Callable
from typing import TYPE_CHECKING, Literal

import numpy as np
from loguru import logger

from action_persistence.dp.operators import (
    apply_expectation,
    apply_k_persistent,
    apply_optimal,
    policy_table,
    state_action_kernel,
)
from action_persistence.mdp.persistence import build_persistent_tabular
from action_persistence.regress.qfunction import TabularQ
from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import InvalidMdpError, PersistenceError

if TYPE_CHECKING:
    from action_persistence.mdp.policy import DiscretePolicy
    from action_persistence.models.mdp import TabularMdp

SolveMode = Literal["expectation", "optimal"]
PersistentMethod = Literal["composition", "explicit"]


def _base_operator(
    mdp: TabularMdp, mode: SolveMode, policy: DiscretePolicy | None
) -> Callable[[TabularQ], TabularQ]:
    if mode == "optimal":
        return lambda q: apply_optimal(mdp, q)
    if policy is None:
        raise InvalidMdpError("expectation mode needs a policy")
    return lambda q: apply_expectation(mdp, policy, q)


def _iterate_to_fixed_point(
    operator: Callable[[TabularQ], TabularQ], q: TabularQ, modulus: float, tol: float
) -> TabularQ:
    """Iterate a ``modulus``-contraction until ``||Tq - q|| <= tol (1 - modulus) / modulus``.

    Returns the last image Tq, which then lies within ``tol`` of the fixed point.
    """
    if tol <= 0.0:
        raise InvalidMdpError(f"tol must be positive, got {tol}")
    if modulus == 0.0:
        return operator(q)
    threshold = tol * (1.0 - modulus) / modulus
    for iteration in range(Constants.MAX_SOLVER_ITERATIONS):
        image = operator(q)
        if np.max(np.abs(image.table - q.table), initial=0.0) <= threshold:
            logger.debug(f"Value iteration converged after {iteration + 1} sweeps")
            return image
        q = image
    logger.warning(f"Value iteration stopped after {Constants.MAX_SOLVER_ITERATIONS} sweeps without converging")
    return q


def solve_q(
    mdp: TabularMdp,
    mode: SolveMode = "optimal",
    policy: DiscretePolicy | None = None,
    tol: float = Constants.DEFAULT_SOLVER_TOL,
) -> TabularQ:
    """Fixed point of T* (``mode="optimal"``) or T^pi (``mode="expectation"``) by value iteration.

    Args:
        mdp: The MDP.
        mode: Which operator to solve.
        policy: The evaluated policy, required in expectation mode.
        tol: Sup-norm distance to the fixed point guaranteed on return.

    Returns:
        Q* or Q^pi within ``tol``.
    """
    zeros = TabularQ(np.zeros((mdp.n_states, mdp.n_actions)))
    return _iterate_to_fixed_point(_base_operator(mdp, mode, policy), zeros, mdp.discount, tol)


def evaluate_policy_exact(mdp: TabularMdp, policy: DiscretePolicy) -> TabularQ:
    """Q^pi from the linear system ``(I - gamma P^pi) q = r`` over state-action pairs."""
    kernel = state_action_kernel(mdp, policy_table(mdp, policy))
    system = np.eye(kernel.shape[0]) - mdp.discount * kernel
    values = np.linalg.solve(system, mdp.reward.reshape(-1))
    return TabularQ(values.reshape(mdp.n_states, mdp.n_actions))


def solve_q_persistent(
    mdp: TabularMdp,
    k: int,
    mode: SolveMode = "optimal",
    policy: DiscretePolicy | None = None,
    tol: float = Constants.DEFAULT_SOLVER_TOL,
    method: PersistentMethod = "composition",
) -> TabularQ:
    """Fixed point of the k-persistent operator.

    ``composition`` iterates ``(T^delta)^(k-1) T`` on the base MDP, a
    ``gamma**k``-contraction; ``explicit`` builds M_k and calls ``solve_q``.

    Args:
        mdp: The base MDP.
        k: Persistence.
        mode: Optimal (Q*_k) or expectation (Q^pi_k).
        policy: The evaluated policy, required in expectation mode.
        tol: Sup-norm distance to the fixed point guaranteed on return.
        method: ``composition`` or ``explicit``.

    Returns:
        Q*_k or Q^pi_k within ``tol``.

    Raises:
        PersistenceError: If k < 1.
    """
    if k < 1:
        raise PersistenceError(f"persistence must be >= 1, got {k}")
    if k == 1:
        return solve_q(mdp, mode, policy, tol)
    if method == "explicit":
        return solve_q(build_persistent_tabular(mdp, k), mode, policy, tol)

    if mode == "expectation" and policy is None:
        raise InvalidMdpError("expectation mode needs a policy")
    evaluated = policy if mode == "expectation" else None

    def persistent_operator(q: TabularQ) -> TabularQ:
        return apply_k_persistent(mdp, q, k, evaluated)

    zeros = TabularQ(np.zeros((mdp.n_states, mdp.n_actions)))
    return _iterate_to_fixed_point(persistent_operator, zeros, mdp.discount**k, tol)
