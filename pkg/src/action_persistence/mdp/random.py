"""Seeded random instances for verification suites and tests."""

from __future__ import annotations

import numpy as np

from action_persistence.mdp.policy import TabularPolicy
from action_persistence.models.mdp import TabularMdp


def random_tabular_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    discount: float,
    reward_scale: float = 1.0,
    branching: int | None = None,
) -> TabularMdp:
    """Draw a random tabular MDP.

    Args:
        rng: Random generator.
        n_states: Number of states.
        n_actions: Number of actions.
        discount: Discount factor.
        reward_scale: Rewards are uniform in ``[-reward_scale, reward_scale]``.
        branching: Number of reachable next states per ``(s, a)``; all states if None.

    Returns:
        The MDP, with Dirichlet(1) transition rows.
    """
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    if branching is not None and branching < n_states:
        for s in range(n_states):
            for a in range(n_actions):
                unreachable = rng.choice(n_states, size=n_states - branching, replace=False)
                transition[s, a, unreachable] = 0.0
        transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    return TabularMdp(transition=transition, reward=reward, discount=discount, r_max=reward_scale)


def random_stochastic_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> TabularPolicy:
    """Draw a policy with Dirichlet(1) action distributions."""
    return TabularPolicy(rng.dirichlet(np.ones(n_actions), size=n_states))


def random_state_action_distribution(rng: np.random.Generator, n_states: int, n_actions: int) -> np.ndarray:
    """Draw a distribution over state-action pairs, shape (n_states, n_actions)."""
    return rng.dirichlet(np.ones(n_states * n_actions)).reshape(n_states, n_actions)
