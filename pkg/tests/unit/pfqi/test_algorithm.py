from __future__ import annotations

from typing import Any

import numpy as np
import pytest

from action_persistence.dp.operators import apply_k_persistent
from action_persistence.dp.solvers import solve_q_persistent
from action_persistence.envs.collect import collect_dataset
from action_persistence.envs.factory import make_env
from action_persistence.mdp.policy import UniformPolicy
from action_persistence.models.dataset import Dataset
from action_persistence.models.mdp import TabularMdp
from action_persistence.models.pfqi import PfqiConfig
from action_persistence.models.regression import ExtraTreesParams, RegressorConfig
from action_persistence.pfqi import algorithm
from action_persistence.pfqi.algorithm import greedy_policy, run_pfqi
from action_persistence.pfqi.targets import predicted_op_count
from action_persistence.regress.qfunction import QFunction, TabularQ
from action_persistence.utils.exceptions import DatasetError, PersistenceError, RegressionError

TABLE = RegressorConfig(kind="table")


def _table_config(k: int, iterations: int, **kwargs: Any) -> PfqiConfig:
    return PfqiConfig(persistence=k, iterations=iterations, regressor=TABLE, **kwargs)


def _all_states(mdp: TabularMdp) -> np.ndarray:
    return np.arange(mdp.n_states, dtype=float).reshape(-1, 1)


class TestRunPfqi:
    """Test cases for run_pfqi."""

    @pytest.mark.parametrize(("k", "iterations"), [(1, 5), (2, 6), (3, 9)])
    def test_matches_exact_iteration(
        self, deterministic_mdp: TabularMdp, covering: Dataset, k: int, iterations: int
    ) -> None:
        """Test that table PFQI on a covering dataset is exact persistent value iteration."""
        run = run_pfqi(covering, _table_config(k, iterations))
        expected = TabularQ(np.zeros((deterministic_mdp.n_states, deterministic_mdp.n_actions)))
        for _ in range(iterations // k):
            expected = apply_k_persistent(deterministic_mdp, expected, k)
        np.testing.assert_allclose(run.final_q.values(_all_states(deterministic_mdp)), expected.table, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_converges_to_persistent_optimum(self, deterministic_mdp: TabularMdp, covering: Dataset, k: int) -> None:
        """Test that many table PFQI iterations reach Q*_k of the covering MDP."""
        run = run_pfqi(covering, _table_config(k, 240, snapshot_every=0))
        expected = solve_q_persistent(deterministic_mdp, k, tol=1e-10)
        np.testing.assert_allclose(run.final_q.values(_all_states(deterministic_mdp)), expected.table, atol=1e-6)

    def test_op_count(self, covering: Dataset) -> None:
        """Test the evaluation count of the first J iterations."""
        run = run_pfqi(covering, _table_config(3, 12, continuation=True))
        assert run.op_count == predicted_op_count(12, covering.n_samples, covering.n_actions, 3)
        assert sum(stat.eval_count for stat in run.stats[:12]) == run.op_count

    def test_mode_schedule(self, covering: Dataset) -> None:
        """Test that iteration j is optimal exactly when j mod k == 0."""
        run = run_pfqi(covering, _table_config(3, 6))
        assert [stat.mode for stat in run.stats] == ["optimal", "persistent", "persistent"] * 2

    def test_continuation(self, deterministic_mdp: TabularMdp, covering: Dataset) -> None:
        """Test that the continuation runs k extra iterations past Q^(J)."""
        plain = run_pfqi(covering, _table_config(2, 4))
        extended = run_pfqi(covering, _table_config(2, 4, continuation=True))
        states = _all_states(deterministic_mdp)
        assert plain.continuation_q is None
        assert extended.continuation_q is not None
        assert len(extended.stats) == 6
        np.testing.assert_array_equal(extended.final_q.values(states), plain.final_q.values(states))
        reference = run_pfqi(covering, _table_config(2, 6))
        np.testing.assert_array_equal(extended.continuation_q.values(states), reference.final_q.values(states))

    def test_callback(self, covering: Dataset) -> None:
        """Test that the callback sees every iteration, continuation included."""
        seen: list[int] = []

        def record(j: int, q: QFunction) -> None:
            seen.append(j)

        run_pfqi(covering, _table_config(2, 4, continuation=True), callback=record)
        assert seen == [1, 2, 3, 4, 5, 6]

    def test_snapshots(self, covering: Dataset) -> None:
        """Test the snapshot cadence."""
        default = run_pfqi(covering, _table_config(2, 6, continuation=True))
        every_three = run_pfqi(covering, _table_config(1, 6, snapshot_every=3))
        disabled = run_pfqi(covering, _table_config(2, 6, snapshot_every=0))
        assert [j for j, _ in default.snapshots] == [2, 4, 6]
        assert [j for j, _ in every_three.snapshots] == [3, 6]
        assert disabled.snapshots == []

    def test_metrics_frame(self, covering: Dataset) -> None:
        """Test the per-iteration metrics columns."""
        frame = run_pfqi(covering, _table_config(2, 4)).metrics_frame()
        assert list(frame.columns) == ["iter", "mode", "y_mean", "y_min", "y_max", "fit_seconds", "eval_count"]
        assert frame["iter"].tolist() == [0, 1, 2, 3]

    def test_discount_override(self, covering: Dataset) -> None:
        """Test that an explicit discount replaces the manifest one."""
        assert run_pfqi(covering, _table_config(1, 2)).discount == pytest.approx(0.9)
        assert run_pfqi(covering, _table_config(1, 2, discount=0.5)).discount == 0.5

    def test_seeded_extra_trees(self) -> None:
        """Test that a fixed seed reproduces the fitted model."""
        dataset = collect_dataset(make_env("cartpole"), UniformPolicy(2), max_samples=120, seed=0)
        regressor = RegressorConfig(extra_trees=ExtraTreesParams(n_estimators=3))
        config = PfqiConfig(persistence=2, iterations=4, regressor=regressor, seed=7)
        first, second = run_pfqi(dataset, config), run_pfqi(dataset, config)
        states = dataset.arrays.states[:10]
        np.testing.assert_array_equal(first.final_q.values(states), second.final_q.values(states))
        assert first.dataset_fingerprint == dataset.fingerprint

    def test_target_bound_violation(self, covering: Dataset, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that targets beyond r_max / (1 - gamma) + r_max abort the run."""
        monkeypatch.setattr(algorithm, "compute_targets", lambda *args: np.full(covering.n_samples, 1e6))
        with pytest.raises(RegressionError):
            run_pfqi(covering, _table_config(1, 2))

    def test_empty_dataset(self, covering: Dataset) -> None:
        """Test that an empty dataset is rejected."""
        empty = Dataset(trajectories=(), manifest=covering.manifest.model_copy(update={"n_samples": 0}))
        with pytest.raises(DatasetError):
            run_pfqi(empty, _table_config(1, 2))

    def test_requires_an_iteration(self, covering: Dataset) -> None:
        """Test that a configuration without iterations yields no model."""
        config = PfqiConfig.model_construct(persistence=1, iterations=0, regressor=TABLE)
        with pytest.raises(PersistenceError):
            run_pfqi(covering, config)


class TestGreedyPolicy:
    """Test cases for greedy_policy."""

    def test_acts_greedily(self) -> None:
        """Test the greedy action."""
        policy = greedy_policy(TabularQ(np.array([[0.0, 1.0], [2.0, 1.0]])))
        np.testing.assert_array_equal(policy.actions(np.array([[0.0], [1.0]])), [1, 0])
