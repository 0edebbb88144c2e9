"""Exact Bellman operators on tabular MDPs.

Every operator takes and returns a ``TabularQ``; the persistent operator
bootstraps on the same action and never materializes the state-action kernel.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from action_persistence.mdp.policy import GreedyPolicy, TabularPolicy
from action_persistence.regress.qfunction import TabularQ
from action_persistence.utils.exceptions import InvalidMdpError

if TYPE_CHECKING:
    from action_persistence.mdp.policy import DiscretePolicy
    from action_persistence.models.mdp import TabularMdp


def policy_table(mdp: TabularMdp, policy: DiscretePolicy) -> np.ndarray:
    """Action probabilities ``pi[s, a]`` of a policy over the states of ``mdp``.

    Raises:
        InvalidMdpError: If the policy is not tabular over the MDP's states and actions.
    """
    if isinstance(policy, GreedyPolicy):
        policy = policy.as_table(mdp.n_states)
    if not isinstance(policy, TabularPolicy):
        raise InvalidMdpError(f"exact computations need a tabular policy, got {type(policy).__name__}")
    if policy.probabilities.shape != (mdp.n_states, mdp.n_actions):
        logger.error(f"Policy table {policy.probabilities.shape} does not match MDP")
        raise InvalidMdpError(
            f"policy table has shape {policy.probabilities.shape}, MDP has ({mdp.n_states}, {mdp.n_actions})"
        )
    return np.asarray(policy.probabilities)


def _check_q(mdp: TabularMdp, q: TabularQ) -> np.ndarray:
    if q.table.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidMdpError(f"Q table has shape {q.table.shape}, MDP has ({mdp.n_states}, {mdp.n_actions})")
    return q.table


def apply_expectation(mdp: TabularMdp, policy: DiscretePolicy, q: TabularQ) -> TabularQ:
    """Apply T^pi: ``r + gamma * P^pi q``."""
    values = (policy_table(mdp, policy) * _check_q(mdp, q)).sum(axis=1)
    return TabularQ(mdp.reward + mdp.discount * (mdp.transition @ values))


def apply_optimal(mdp: TabularMdp, q: TabularQ) -> TabularQ:
    """Apply T*: ``r + gamma * E[max_a' q(s', a')]``."""
    values = _check_q(mdp, q).max(axis=1)
    return TabularQ(mdp.reward + mdp.discount * (mdp.transition @ values))


def apply_persistent(mdp: TabularMdp, q: TabularQ) -> TabularQ:
    """Apply T^delta: ``r + gamma * E[q(s', a)]`` with the next value at the same action."""
    held = np.einsum("sat,ta->sa", mdp.transition, _check_q(mdp, q))
    return TabularQ(mdp.reward + mdp.discount * held)


def state_action_kernel(mdp: TabularMdp, probabilities: np.ndarray) -> np.ndarray:
    """Joint kernel ``P^pi[(s, a), (s', a')] = P(s'|s, a) pi(a'|s')`` of shape (SA, SA).

    Only the bound and selection checks use it; operators work on state marginals.
    """
    n = mdp.n_states * mdp.n_actions
    return (mdp.transition[:, :, :, None] * probabilities[None, None, :, :]).reshape(n, n)


def apply_k_persistent(mdp: TabularMdp, q: TabularQ, k: int, policy: DiscretePolicy | None = None) -> TabularQ:
    """Apply ``(T^delta)^(k-1) T`` where T is T^pi when a policy is given and T* otherwise."""
    q = apply_optimal(mdp, q) if policy is None else apply_expectation(mdp, policy, q)
    for _ in range(k - 1):
        q = apply_persistent(mdp, q)
    return q
