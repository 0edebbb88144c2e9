"""Monte-Carlo evaluation of policies executed at a given persistence."""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal

import numpy as np
from loguru import logger

from action_persistence.mdp.persistence import persistent_rollout
from action_persistence.mdp.policy import UniformPolicy
from action_persistence.models.reports import EvalEntry
from action_persistence.utils.seeding import derive_seed

if TYPE_CHECKING:
    from action_persistence.envs.base import Environment
    from action_persistence.mdp.policy import DiscretePolicy


def episode_returns(
    env: Environment,
    policy: DiscretePolicy,
    k_prime: int,
    n_episodes: int,
    seed: int,
    horizon: int | None = None,
) -> tuple[list[float], list[float]]:
    """Roll ``policy`` out at persistence ``k_prime`` in the base environment.

    Returns are summed over base steps; the discounted one uses the base discount of
    ``env``. Episode i uses the rollout seed derived from ``(seed, i)``.

    Args:
        env: Base environment.
        policy: Inner policy, queried every ``k_prime`` steps.
        k_prime: Execution persistence.
        n_episodes: Number of episodes.
        seed: Evaluation seed.
        horizon: Base steps per episode; the environment horizon if None.

    Returns:
        Discounted and undiscounted returns, one per episode.
    """
    gamma = env.spec.discount
    horizon = env.spec.horizon if horizon is None else horizon
    discounted, undiscounted = [], []
    for episode in range(n_episodes):
        trajectory = persistent_rollout(env, policy, k_prime, horizon, derive_seed(seed, "episode", episode))
        rewards = np.array([transition.reward for transition in trajectory.transitions])
        discounted.append(float(np.sum(gamma ** np.arange(rewards.size) * rewards)))
        undiscounted.append(float(rewards.sum()))
    return discounted, undiscounted


def evaluate_policy(
    env: Environment,
    policy: DiscretePolicy,
    seed_index: int,
    k: int,
    k_prime: int,
    n_episodes: int,
    seed: int,
    label: Literal["greedy", "uniform"] = "greedy",
) -> EvalEntry:
    """Evaluate a policy trained at persistence ``k`` when executed at ``k_prime``."""
    returns, undiscounted = episode_returns(env, policy, k_prime, n_episodes, seed)
    entry = EvalEntry(
        seed=seed_index,
        k=k,
        k_prime=k_prime,
        policy=label,
        returns=returns,
        undiscounted_returns=undiscounted,
    )
    logger.debug(f"seed {seed_index} {label} k={k} at k'={k_prime}: mean return {entry.mean:.4f}")
    return entry


def evaluate_uniform(env: Environment, seed_index: int, k_prime: int, n_episodes: int, seed: int) -> EvalEntry:
    """Evaluate the uniform policy at persistence ``k_prime`` as a reference row."""
    return evaluate_policy(
        env, UniformPolicy(env.spec.n_actions), seed_index, k_prime, k_prime, n_episodes, seed, label="uniform"
    )
