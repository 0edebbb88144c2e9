from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from pydantic import ValidationError

from action_persistence.envs.base import Environment, Seed, StepResult
from action_persistence.models.dataset import Trajectory, Transition
from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.exceptions import InvalidMdpError, PersistenceError

if TYPE_CHECKING:
    from action_persistence.mdp.policy import DiscretePolicy


def _check_persistence(k: int) -> None:
    if k < 1:
        logger.error(f"Persistence must be >= 1, got {k}")
        raise PersistenceError(f"persistence must be >= 1, got {k}")


class PersistentExecutor:
    """Runs a policy at persistence k: the inner policy is queried only when t mod k == 0.

    The counter is per episode; ``reset`` drops the held action.
    """

    def __init__(self, policy: DiscretePolicy, persistence: int):
        """Initialize the executor.

        Args:
            policy: The inner Markovian policy.
            persistence: Persistence k >= 1.

        Raises:
            PersistenceError: If k < 1.
        """
        _check_persistence(persistence)
        self.policy = policy
        self.persistence = persistence
        self.step_counter = 0
        self.held_action: int | None = None

    def reset(self) -> None:
        """Start a new episode."""
        self.step_counter = 0
        self.held_action = None

    def act(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Return the action for the current step and advance the counter."""
        if self.held_action is None or self.step_counter % self.persistence == 0:
            self.held_action = self.policy.act(state, rng)
        self.step_counter += 1
        return self.held_action


def build_persistent_tabular(mdp: TabularMdp, k: int) -> TabularMdp:
    """Build the k-persistent MDP M_k.

    For each action the state marginal under the held action is propagated k - 1
    times, so the joint state-action kernel is never materialized. The reward is
    the discounted sum collected along the k held steps and the discount is
    ``gamma ** k``.

    Args:
        mdp: The base MDP.
        k: Persistence.

    Returns:
        M_k; the input object itself when ``k == 1``.

    Raises:
        PersistenceError: If k < 1.
        InvalidMdpError: If the resulting tables are not a valid MDP.
    """
    _check_persistence(k)
    if k == 1:
        return mdp
    gamma = mdp.discount
    transition = np.empty_like(mdp.transition)
    reward = np.empty_like(mdp.reward)
    for action in range(mdp.n_actions):
        held = mdp.transition[:, action, :]
        marginal = np.eye(mdp.n_states)
        accumulated = np.zeros(mdp.n_states)
        for i in range(k):
            accumulated += gamma**i * (marginal @ mdp.reward[:, action])
            marginal = marginal @ held
        transition[:, action, :] = marginal / marginal.sum(axis=1, keepdims=True)
        reward[:, action] = accumulated
    r_max = mdp.reward_bound * (1.0 - gamma**k) / (1.0 - gamma)
    try:
        return TabularMdp(transition=transition, reward=reward, discount=gamma**k, r_max=r_max)
    except ValidationError as e:
        raise InvalidMdpError(f"k={k} persistent MDP is invalid: {e}") from e


def persistent_rollout(
    env: Environment,
    policy: DiscretePolicy,
    k: int,
    horizon: int,
    rng_seed: Seed,
) -> Trajectory:
    """Roll a policy out at persistence k, recording every base-MDP transition.

    The seed is split into an environment stream (consumed by ``env.reset``) and a
    policy stream (consumed only at decision epochs), so a plain rollout on
    ``wrap_persistent_env(env, k)`` with the same seed visits the same decision-epoch
    states.

    Args:
        env: Environment to run in.
        policy: Inner policy.
        k: Persistence.
        horizon: Maximum number of base steps.
        rng_seed: Seed of the rollout.

    Returns:
        The trajectory, stopped at the horizon or at the first terminal transition.

    Raises:
        PersistenceError: If k < 1 or horizon < 1.
    """
    _check_persistence(k)
    if horizon < 1:
        raise PersistenceError(f"horizon must be >= 1, got {horizon}")
    env_seed, policy_seed = np.random.SeedSequence(rng_seed).spawn(2)
    rng = np.random.default_rng(policy_seed)
    executor = PersistentExecutor(policy, k)
    state = env.reset(env_seed)
    transitions = []
    for _ in range(horizon):
        action = executor.act(state, rng)
        result = env.step(action)
        transitions.append(
            Transition(
                state=state,
                action=action,
                next_state=result.next_state,
                reward=result.reward,
                terminal=result.terminal,
            )
        )
        state = result.next_state
        if result.terminal:
            break
    return Trajectory(transitions=tuple(transitions))


class PersistentEnvironment(Environment):
    """Environment view of persistence: one step holds the action for k inner steps.

    The reward is ``sum_i gamma**i R_{t+i}`` over the inner steps actually taken; an
    inner terminal ends the outer step early with the partial sum.
    """

    def __init__(self, inner: Environment, k: int):
        """Initialize the wrapper.

        Args:
            inner: The base environment.
            k: Persistence.

        Raises:
            PersistenceError: If k < 1.
        """
        _check_persistence(k)
        super().__init__(inner.spec.model_copy(update={"persistence": inner.spec.persistence * k}))
        self.inner = inner
        self.persistence = k

    def reset(self, seed: Seed = None) -> np.ndarray:
        """Reset the inner environment."""
        return self.inner.reset(seed)

    def step(self, action: int) -> StepResult:
        """Apply ``action`` k times in the inner environment."""
        gamma = self.inner.spec.discount
        result = self.inner.step(action)
        total = result.reward
        for i in range(1, self.persistence):
            if result.terminal:
                break
            result = self.inner.step(action)
            total += gamma**i * result.reward
        return StepResult(result.next_state, total, result.terminal)


def wrap_persistent_env(env: Environment, k: int) -> Environment:
    """Expose ``env`` as its k-persistent counterpart.

    Raises:
        PersistenceError: If k < 1.
    """
    _check_persistence(k)
    if k == 1:
        return env
    return PersistentEnvironment(env, k)
