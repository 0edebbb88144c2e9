from __future__ import annotations

from typing import ClassVar

import numpy as np

from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.exceptions import InvalidMdpError


class CounterexampleStates:
    """State and action indices of the counterexample MDP."""

    START: ClassVar[int] = 0
    BRANCH: ClassVar[int] = 1
    GOOD: ClassVar[int] = 2
    BAD: ClassVar[int] = 3
    FIRST_ACTION: ClassVar[int] = 0
    SECOND_ACTION: ClassVar[int] = 1


def counterexample_mdp(reward: float = 1.0, gamma: float = 0.9) -> TabularMdp:
    """Four-state MDP on which persisting any action loses exactly ``2 gamma R / (1 - gamma)``.

    From the start state the first action leads to the branch state and the
    second to the bad absorbing state, both with reward 0. In the branch state the
    second action reaches the good absorbing state (reward R) and the first the
    bad one (reward -R). Absorbing states pay R and -R forever. The optimal base
    policy plays the first action then the second; with persistence k >= 2 every
    path from the start ends in the bad state.

    Args:
        reward: The magnitude R > 0.
        gamma: Discount factor in (0, 1).

    Returns:
        The MDP, with ``r_max = R``.

    Raises:
        InvalidMdpError: If R <= 0 or gamma is outside (0, 1).
    """
    if reward <= 0.0:
        raise InvalidMdpError(f"R must be positive, got {reward}")
    if not 0.0 < gamma < 1.0:
        raise InvalidMdpError(f"gamma must lie in (0, 1), got {gamma}")
    s = CounterexampleStates
    transition = np.zeros((4, 2, 4))
    rewards = np.zeros((4, 2))
    transition[s.START, s.FIRST_ACTION, s.BRANCH] = 1.0
    transition[s.START, s.SECOND_ACTION, s.BAD] = 1.0
    transition[s.BRANCH, s.SECOND_ACTION, s.GOOD] = 1.0
    rewards[s.BRANCH, s.SECOND_ACTION] = reward
    transition[s.BRANCH, s.FIRST_ACTION, s.BAD] = 1.0
    rewards[s.BRANCH, s.FIRST_ACTION] = -reward
    transition[s.GOOD, :, s.GOOD] = 1.0
    rewards[s.GOOD, :] = reward
    transition[s.BAD, :, s.BAD] = 1.0
    rewards[s.BAD, :] = -reward
    return TabularMdp(transition=transition, reward=rewards, discount=gamma, r_max=reward)
