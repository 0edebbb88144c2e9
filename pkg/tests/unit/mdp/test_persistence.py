from __future__ import annotations

from unittest.mock import MagicMock

import numpy as np
import pytest

from action_persistence.dp.counterexample import CounterexampleStates as S
from action_persistence.dp.counterexample import counterexample_mdp
from action_persistence.envs.classic import CartPoleEnv
from action_persistence.envs.tabular import TabularEnv
from action_persistence.mdp.persistence import (
    PersistentEnvironment,
    PersistentExecutor,
    build_persistent_tabular,
    persistent_rollout,
    wrap_persistent_env,
)
from action_persistence.mdp.policy import DiscretePolicy, TabularPolicy, UniformPolicy
from action_persistence.mdp.random import random_tabular_mdp
from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.exceptions import PersistenceError

R = 2.0
GAMMA = 0.9


@pytest.fixture
def counterexample() -> TabularMdp:
    """Counterexample MDP with R = 2 and gamma = 0.9."""
    return counterexample_mdp(R, GAMMA)


@pytest.fixture
def start_env(counterexample: TabularMdp) -> TabularEnv:
    """Counterexample environment always starting in the start state."""
    return TabularEnv(counterexample, horizon=10, initial_distribution=np.array([1.0, 0.0, 0.0, 0.0]))


@pytest.fixture
def optimal_policy() -> TabularPolicy:
    """First action in the start state, second everywhere else."""
    return TabularPolicy.deterministic([S.FIRST_ACTION, S.SECOND_ACTION, S.SECOND_ACTION, S.SECOND_ACTION], 2)


class TestPersistentExecutor:
    """Test cases for PersistentExecutor."""

    def test_queries_every_k_steps(self) -> None:
        """Test that the inner policy is queried at t mod k == 0 only."""
        policy = MagicMock(spec=DiscretePolicy)
        policy.act.side_effect = [1, 0, 1]
        executor = PersistentExecutor(policy, persistence=3)
        rng = np.random.default_rng(0)
        actions = [executor.act(np.zeros(1), rng) for _ in range(7)]
        assert actions == [1, 1, 1, 0, 0, 0, 1]
        assert policy.act.call_count == 3

    def test_reset_restarts_counter(self) -> None:
        """Test that reset forces a new decision."""
        policy = MagicMock(spec=DiscretePolicy)
        policy.act.side_effect = [1, 0]
        executor = PersistentExecutor(policy, persistence=4)
        rng = np.random.default_rng(0)
        executor.act(np.zeros(1), rng)
        executor.reset()
        assert executor.act(np.zeros(1), rng) == 0

    def test_rejects_zero_persistence(self) -> None:
        """Test the k >= 1 check."""
        with pytest.raises(PersistenceError):
            PersistentExecutor(UniformPolicy(2), persistence=0)


class TestBuildPersistentTabular:
    """Test cases for build_persistent_tabular."""

    def test_identity_for_k1(self, counterexample: TabularMdp) -> None:
        """Test that k = 1 returns the MDP itself."""
        assert build_persistent_tabular(counterexample, 1) is counterexample

    def test_counterexample_k2(self, counterexample: TabularMdp) -> None:
        """Test the 2-persistent counterexample tables."""
        m2 = build_persistent_tabular(counterexample, 2)
        assert m2.discount == pytest.approx(GAMMA**2)
        assert m2.transition[S.START, S.FIRST_ACTION, S.BAD] == pytest.approx(1.0)
        assert m2.transition[S.START, S.SECOND_ACTION, S.BAD] == pytest.approx(1.0)
        assert m2.transition[S.BRANCH, S.SECOND_ACTION, S.GOOD] == pytest.approx(1.0)
        assert m2.reward[S.START, S.FIRST_ACTION] == pytest.approx(-GAMMA * R)
        assert m2.reward[S.START, S.SECOND_ACTION] == pytest.approx(-GAMMA * R)
        assert m2.reward[S.BRANCH, S.SECOND_ACTION] == pytest.approx(R + GAMMA * R)
        assert m2.reward_bound == pytest.approx(R * (1 + GAMMA))

    def test_matches_matrix_powers(self) -> None:
        """Test the transition and reward against explicit powers of the held kernel."""
        mdp = random_tabular_mdp(np.random.default_rng(4), 5, 3, 0.8)
        k = 3
        mk = build_persistent_tabular(mdp, k)
        for a in range(mdp.n_actions):
            held = mdp.transition[:, a, :]
            np.testing.assert_allclose(mk.transition[:, a, :], np.linalg.matrix_power(held, k), atol=1e-12)
            expected = sum(0.8**i * np.linalg.matrix_power(held, i) @ mdp.reward[:, a] for i in range(k))
            np.testing.assert_allclose(mk.reward[:, a], expected, atol=1e-12)

    def test_rejects_zero_persistence(self, counterexample: TabularMdp) -> None:
        """Test the k >= 1 check."""
        with pytest.raises(PersistenceError):
            build_persistent_tabular(counterexample, 0)


class TestPersistentRollout:
    """Test cases for persistent_rollout."""

    def test_optimal_policy_at_k1(self, start_env: TabularEnv, optimal_policy: TabularPolicy) -> None:
        """Test that the base rollout reaches the good state."""
        trajectory = persistent_rollout(start_env, optimal_policy, 1, 5, rng_seed=0)
        assert [t.reward for t in trajectory.transitions] == [0.0, R, R, R, R]

    def test_optimal_policy_at_k2(self, start_env: TabularEnv, optimal_policy: TabularPolicy) -> None:
        """Test that holding the first action twice ends in the bad state."""
        trajectory = persistent_rollout(start_env, optimal_policy, 2, 5, rng_seed=0)
        assert [t.action for t in trajectory.transitions] == [0, 0, 1, 1, 1]
        assert [t.reward for t in trajectory.transitions] == [0.0, -R, -R, -R, -R]

    def test_reproducible(self) -> None:
        """Test that a fixed seed gives an identical trajectory."""
        env = TabularEnv(random_tabular_mdp(np.random.default_rng(0), 4, 2, 0.9), horizon=20)
        first = persistent_rollout(env, UniformPolicy(2), 3, 20, rng_seed=11)
        second = persistent_rollout(env, UniformPolicy(2), 3, 20, rng_seed=11)
        assert [t.action for t in first.transitions] == [t.action for t in second.transitions]
        assert [t.reward for t in first.transitions] == [t.reward for t in second.transitions]

    def test_rejects_bad_horizon(self, start_env: TabularEnv, optimal_policy: TabularPolicy) -> None:
        """Test the horizon check."""
        with pytest.raises(PersistenceError):
            persistent_rollout(start_env, optimal_policy, 1, 0, rng_seed=0)


class TestPersistentEnvironment:
    """Test cases for the persistent environment wrapper."""

    def test_identity_for_k1(self, start_env: TabularEnv) -> None:
        """Test that k = 1 returns the environment itself."""
        assert wrap_persistent_env(start_env, 1) is start_env

    def test_spec(self, start_env: TabularEnv) -> None:
        """Test the derived discount and horizon."""
        wrapped = wrap_persistent_env(start_env, 3)
        assert isinstance(wrapped, PersistentEnvironment)
        assert wrapped.spec.discount == pytest.approx(GAMMA**3)
        assert wrapped.spec.horizon == 4

    def test_aggregated_reward(self, start_env: TabularEnv) -> None:
        """Test the discounted reward of one held step."""
        wrapped = wrap_persistent_env(start_env, 2)
        wrapped.reset(0)
        result = wrapped.step(S.FIRST_ACTION)
        assert int(result.next_state[0]) == S.BAD
        assert result.reward == pytest.approx(-GAMMA * R)

    def test_matches_persistent_rollout(self) -> None:
        """Test that wrapped decisions see the same states and aggregated rewards."""
        mdp = random_tabular_mdp(np.random.default_rng(2), 5, 3, 0.9)
        k = 3
        policy = TabularPolicy(np.full((5, 3), 1.0 / 3.0))
        base = persistent_rollout(TabularEnv(mdp, horizon=30), policy, k, 30, rng_seed=7)
        outer = persistent_rollout(wrap_persistent_env(TabularEnv(mdp, horizon=30), k), policy, 1, 10, rng_seed=7)
        for j, step in enumerate(outer.transitions):
            chunk = base.transitions[j * k : (j + 1) * k]
            np.testing.assert_array_equal(step.state, chunk[0].state)
            assert step.action == chunk[0].action
            expected = sum(0.9**i * t.reward for i, t in enumerate(chunk))
            assert step.reward == pytest.approx(expected, abs=1e-12)

    def test_terminal_ends_step_early(self) -> None:
        """Test that an inner terminal stops the held action with the partial discounted sum."""
        base = CartPoleEnv()
        base.reset(3)
        gamma = base.spec.discount
        expected = 0.0
        steps = 0
        while True:
            result = base.step(1)
            expected += gamma**steps * result.reward
            steps += 1
            if result.terminal:
                break
        wrapped = wrap_persistent_env(CartPoleEnv(), steps + 50)
        wrapped.reset(3)
        outcome = wrapped.step(1)
        assert outcome.terminal
        np.testing.assert_array_equal(outcome.next_state, result.next_state)
        assert outcome.reward == pytest.approx(expected, abs=1e-12)


@pytest.fixture
def three_state_mdp() -> TabularMdp:
    """Three-state MDP whose two-step kernels have no small entries."""
    transition = np.array(
        [
            [[0.5, 0.3, 0.2], [0.1, 0.6, 0.3]],
            [[0.2, 0.5, 0.3], [0.4, 0.2, 0.4]],
            [[0.3, 0.2, 0.5], [0.3, 0.3, 0.4]],
        ]
    )
    reward = np.array([[1.0, 0.0], [0.0, 0.5], [-1.0, 0.2]])
    return TabularMdp(transition=transition, reward=reward, discount=0.9)


class TestPersistentSampling:
    """Test cases comparing sampled two-step behavior with the M_2 kernel."""

    N_EPISODES = 4000

    @staticmethod
    def _assert_frequencies(counts: np.ndarray, expected: np.ndarray, n: int) -> None:
        frequencies = counts / n
        tolerance = 3.0 * np.sqrt(expected * (1.0 - expected) / n) + 1e-12
        assert np.all(np.abs(frequencies - expected) <= tolerance)

    def test_rollout_frequencies(self, three_state_mdp: TabularMdp) -> None:
        """Test that the state reached after one held decision follows P_2[s0, a]."""
        env = TabularEnv(three_state_mdp, horizon=10, initial_distribution=np.array([1.0, 0.0, 0.0]))
        policy = TabularPolicy.deterministic([0, 0, 0], 2)
        counts = np.zeros(3)
        for seed in range(self.N_EPISODES):
            trajectory = persistent_rollout(env, policy, 2, 2, rng_seed=seed)
            counts[int(trajectory.transitions[-1].next_state[0])] += 1
        expected = build_persistent_tabular(three_state_mdp, 2).transition[0, 0]
        self._assert_frequencies(counts, expected, self.N_EPISODES)

    def test_wrapped_frequencies(self, three_state_mdp: TabularMdp) -> None:
        """Test that one wrapped step follows P_2[s0, a]."""
        wrapped = wrap_persistent_env(
            TabularEnv(three_state_mdp, horizon=10, initial_distribution=np.array([1.0, 0.0, 0.0])), 2
        )
        counts = np.zeros(3)
        for seed in range(self.N_EPISODES):
            wrapped.reset(seed)
            counts[int(wrapped.step(1).next_state[0])] += 1
        expected = build_persistent_tabular(three_state_mdp, 2).transition[0, 1]
        self._assert_frequencies(counts, expected, self.N_EPISODES)

    @pytest.mark.parametrize("k", [2, 3])
    def test_two_decisions_of_mk_match_m2k(self, three_state_mdp: TabularMdp, k: int) -> None:
        """Test that holding for two decisions of M_k is the same MDP as M_2k."""
        nested = build_persistent_tabular(build_persistent_tabular(three_state_mdp, k), 2)
        direct = build_persistent_tabular(three_state_mdp, 2 * k)
        np.testing.assert_allclose(nested.transition, direct.transition, atol=1e-12)
        np.testing.assert_allclose(nested.reward, direct.reward, atol=1e-12)
        assert nested.discount == pytest.approx(direct.discount)
