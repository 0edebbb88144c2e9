from __future__ import annotations

import numpy as np
import pytest

from action_persistence.dp.counterexample import CounterexampleStates as S
from action_persistence.dp.counterexample import counterexample_mdp
from action_persistence.dp.solvers import evaluate_policy_exact, solve_q, solve_q_persistent
from action_persistence.mdp.persistence import build_persistent_tabular
from action_persistence.mdp.random import random_stochastic_policy, random_tabular_mdp
from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.exceptions import InvalidMdpError, PersistenceError


@pytest.fixture
def mdp() -> TabularMdp:
    """Random 6-state, 2-action MDP."""
    return random_tabular_mdp(np.random.default_rng(1), 6, 2, 0.85)


class TestSolveQ:
    """Test cases for solve_q and evaluate_policy_exact."""

    def test_counterexample_optimum(self) -> None:
        """Test Q* of the counterexample start state."""
        q = solve_q(counterexample_mdp(1.0, 0.9))
        assert q.table[S.START, S.FIRST_ACTION] == pytest.approx(0.9 / 0.1, abs=1e-8)
        assert q.table[S.START, S.SECOND_ACTION] == pytest.approx(-0.9 / 0.1, abs=1e-8)

    def test_iteration_matches_linear_solve(self, mdp: TabularMdp) -> None:
        """Test value iteration against the exact linear system."""
        policy = random_stochastic_policy(np.random.default_rng(2), 6, 2)
        iterated = solve_q(mdp, "expectation", policy)
        exact = evaluate_policy_exact(mdp, policy)
        np.testing.assert_allclose(iterated.table, exact.table, atol=1e-9)

    def test_expectation_needs_policy(self, mdp: TabularMdp) -> None:
        """Test that expectation mode without a policy fails."""
        with pytest.raises(InvalidMdpError):
            solve_q(mdp, "expectation")

    def test_rejects_non_positive_tolerance(self, mdp: TabularMdp) -> None:
        """Test the tolerance check."""
        with pytest.raises(InvalidMdpError):
            solve_q(mdp, tol=0.0)


class TestSolveQPersistent:
    """Test cases for solve_q_persistent."""

    @pytest.mark.parametrize("k", [2, 3, 6])
    def test_counterexample_persistent_optimum(self, k: int) -> None:
        """Test that persisting any action from the start loses."""
        q = solve_q_persistent(counterexample_mdp(1.0, 0.9), k)
        np.testing.assert_allclose(q.table[S.START], [-0.9 / 0.1, -0.9 / 0.1], atol=1e-8)

    @pytest.mark.parametrize("k", [2, 4])
    def test_composition_matches_explicit(self, mdp: TabularMdp, k: int) -> None:
        """Test both methods in both modes."""
        policy = random_stochastic_policy(np.random.default_rng(3), 6, 2)
        for mode, evaluated in (("optimal", None), ("expectation", policy)):
            composed = solve_q_persistent(mdp, k, mode, evaluated, method="composition")
            explicit = solve_q_persistent(mdp, k, mode, evaluated, method="explicit")
            np.testing.assert_allclose(composed.table, explicit.table, atol=1e-8)

    def test_explicit_matches_linear_solve(self, mdp: TabularMdp) -> None:
        """Test Q^pi_k against the linear system on M_k."""
        policy = random_stochastic_policy(np.random.default_rng(4), 6, 2)
        composed = solve_q_persistent(mdp, 3, "expectation", policy)
        exact = evaluate_policy_exact(build_persistent_tabular(mdp, 3), policy)
        np.testing.assert_allclose(composed.table, exact.table, atol=1e-8)

    def test_persistent_optimum_is_dominated(self, mdp: TabularMdp) -> None:
        """Test Q*_k <= Q* pointwise."""
        base = solve_q(mdp)
        persistent = solve_q_persistent(mdp, 3)
        assert np.all(persistent.table <= base.table + 1e-8)

    def test_rejects_zero_persistence(self, mdp: TabularMdp) -> None:
        """Test the k >= 1 check."""
        with pytest.raises(PersistenceError):
            solve_q_persistent(mdp, 0)
