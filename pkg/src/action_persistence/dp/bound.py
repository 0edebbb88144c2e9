from __future__ import annotations

import math
from typing import TYPE_CHECKING, Literal

import numpy as np
from loguru import logger

from action_persistence.dp.operators import (
    apply_expectation,
    apply_optimal,
    apply_persistent,
    policy_table,
    state_action_kernel,
)
from action_persistence.dp.solvers import evaluate_policy_exact
from action_persistence.mdp.persistence import build_persistent_tabular
from action_persistence.mdp.policy import GreedyPolicy
from action_persistence.models.reports import BoundReport, SelectionLowerBound
from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import PersistenceError

if TYPE_CHECKING:
    from action_persistence.mdp.policy import DiscretePolicy
    from action_persistence.models.mdp import TabularMdp
    from action_persistence.regress.qfunction import TabularQ

EtaMethod = Literal["linear", "truncated"]


def _validate_distribution(weights: np.ndarray, shape: tuple[int, ...], name: str) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != shape:
        raise PersistenceError(f"{name} must have shape {shape}, got {weights.shape}")
    if np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > Constants.DISTRIBUTION_ATOL:
        logger.error(f"{name} is not a probability distribution (sum={weights.sum()})")
        raise PersistenceError(f"{name} must be a non-negative distribution summing to 1, sum is {weights.sum()}")
    return weights


def _weighted_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    return float(np.sum(weights * np.abs(values) ** p) ** (1.0 / p))


def _eta_linear(rho: np.ndarray, kernel: np.ndarray, gamma: float, k: int) -> np.ndarray:
    """Unnormalized ``sum_{i >= 1, i mod k != 0} gamma**i rho kernel**(i-1)`` via two linear solves."""
    identity = np.eye(kernel.shape[0])
    every_step = gamma * np.linalg.solve((identity - gamma * kernel).T, rho)
    lead = rho @ np.linalg.matrix_power(kernel, k - 1)
    block = np.linalg.matrix_power(kernel, k)
    decision_steps = gamma**k * np.linalg.solve((identity - gamma**k * block).T, lead)
    return every_step - decision_steps


def _eta_truncated(rho: np.ndarray, kernel: np.ndarray, gamma: float, k: int, n_terms: int) -> np.ndarray:
    """The same series summed over its first ``n_terms`` terms."""
    total = np.zeros_like(rho)
    current = rho.copy()
    for i in range(1, n_terms + 1):
        if i % k != 0:
            total += gamma**i * current
        current = current @ kernel
    return total


def persistence_loss_bound(
    mdp: TabularMdp,
    policy: DiscretePolicy,
    k: int,
    p: float = 1.0,
    rho: np.ndarray | None = None,
    method: EtaMethod = "linear",
    n_terms: int = 1000,
) -> BoundReport:
    """Evaluate both sides of the persistence performance-loss bound on a tabular MDP.

    The left side is ``||Q^pi - Q^pi_k||_{p,rho}``. The right side is the
    coefficient ``gamma (1 - gamma^(k-1)) / ((1 - gamma)(1 - gamma^k))`` times the
    ``eta``-weighted norm of the dissimilarity
    ``d(s, a) = max_f |(P^pi f - P^delta f)(s, a)|``, where f ranges over
    ``(T^delta)^l T^pi Q^pi_k`` for ``l = 0..k-2``.

    Args:
        mdp: The base MDP.
        policy: Evaluated policy.
        k: Persistence.
        p: Order of the norms, finite and >= 1.
        rho: State-action distribution of shape (S, A); uniform if None.
        method: ``linear`` solves the Neumann series exactly; ``truncated`` sums
            ``n_terms`` terms and reports the neglected tail mass.
        n_terms: Number of series terms for the truncated method.

    Returns:
        The bound report; all quantities are zero for k = 1.

    Raises:
        PersistenceError: If rho is not a distribution, k < 1 or p is not in [1, inf).
    """
    if k < 1:
        raise PersistenceError(f"persistence must be >= 1, got {k}")
    if not math.isfinite(p) or p < 1.0:
        raise PersistenceError(f"p must be finite and >= 1, got {p}")
    shape = (mdp.n_states, mdp.n_actions)
    rho = np.full(shape, 1.0 / (shape[0] * shape[1])) if rho is None else _validate_distribution(rho, shape, "rho")
    gamma = mdp.discount
    if k == 1 or gamma == 0.0:
        return BoundReport(k=k, p=p, lhs=0.0, coefficient=0.0, dissimilarity_norm=0.0, rhs=0.0)

    probabilities = policy_table(mdp, policy)
    q_pi = evaluate_policy_exact(mdp, policy)
    q_pi_k = evaluate_policy_exact(build_persistent_tabular(mdp, k), policy)
    lhs = _weighted_norm(q_pi.table - q_pi_k.table, rho, p)

    f = apply_expectation(mdp, policy, q_pi_k)
    dissimilarity = np.zeros(shape)
    for _ in range(k - 1):
        expected = mdp.transition @ (probabilities * f.table).sum(axis=1)
        held = np.einsum("sat,ta->sa", mdp.transition, f.table)
        dissimilarity = np.maximum(dissimilarity, np.abs(expected - held))
        f = apply_persistent(mdp, f)

    kernel = state_action_kernel(mdp, probabilities)
    coefficient = gamma * (1.0 - gamma ** (k - 1)) / ((1.0 - gamma) * (1.0 - gamma**k))
    if method == "linear":
        series = _eta_linear(rho.reshape(-1), kernel, gamma, k)
        tail_bound = 0.0
    else:
        series = _eta_truncated(rho.reshape(-1), kernel, gamma, k, n_terms)
        tail_bound = gamma**n_terms / (1.0 - gamma)
    eta = np.clip(series / coefficient, 0.0, None).reshape(shape)

    dissimilarity_norm = _weighted_norm(dissimilarity, eta, p)
    report = BoundReport(
        k=k,
        p=p,
        lhs=lhs,
        coefficient=coefficient,
        dissimilarity_norm=dissimilarity_norm,
        rhs=coefficient * dissimilarity_norm,
        eta_weights=eta.tolist(),
        tail_bound=tail_bound,
    )
    if not report.holds:
        logger.warning(f"Persistence bound violated at k={k}, p={p}: lhs={lhs:.6g} > rhs={report.rhs:.6g}")
    return report


def selection_lower_bound(mdp: TabularMdp, q: TabularQ, k: int, rho: np.ndarray | None = None) -> SelectionLowerBound:
    """Check the lower bound behind persistence selection exactly on a tabular MDP.

    For the greedy policy pi of ``q`` executed at persistence k, compares the true
    return ``J_k^{rho,pi}`` with ``J^rho - ||T*_k q - q||_{1,eta} / (1 - gamma^k)``,
    where ``J^rho = E_rho[max_a q(s, a)]`` and
    ``eta = (1 - gamma^k) rho pi (I - gamma^k P_k^pi)^(-1)``.

    Args:
        mdp: The base MDP.
        q: Q-function of the candidate persistence.
        k: Persistence.
        rho: Initial-state distribution of shape (S,); uniform if None.

    Returns:
        The true return, the estimate, the weighted residual and the bound.
    """
    persistent = build_persistent_tabular(mdp, k)
    rho = (
        np.full(mdp.n_states, 1.0 / mdp.n_states)
        if rho is None
        else _validate_distribution(rho, (mdp.n_states,), "rho")
    )
    policy = GreedyPolicy(q).as_table(mdp.n_states)
    probabilities = policy.probabilities
    gamma_k = persistent.discount

    true_q = evaluate_policy_exact(persistent, policy)
    true_return = float(rho @ (probabilities * true_q.table).sum(axis=1))
    estimated_return = float(rho @ q.table.max(axis=1))

    kernel = state_action_kernel(persistent, probabilities)
    start = (rho[:, None] * probabilities).reshape(-1)
    eta = (1.0 - gamma_k) * np.linalg.solve((np.eye(kernel.shape[0]) - gamma_k * kernel).T, start)
    eta = np.clip(eta, 0.0, None)
    gap = apply_optimal(persistent, q).table - q.table
    residual = float(eta @ np.abs(gap).reshape(-1))
    return SelectionLowerBound(
        k=k,
        true_return=true_return,
        estimated_return=estimated_return,
        residual=residual,
        bound=estimated_return - residual / (1.0 - gamma_k),
    )
