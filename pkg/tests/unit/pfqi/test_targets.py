from __future__ import annotations

import numpy as np
import pytest

from action_persistence.models.dataset import Dataset, DatasetManifest, Trajectory, Transition
from action_persistence.pfqi.targets import compute_targets, predicted_op_count
from action_persistence.regress.qfunction import CountingQFunction, TabularQ
from action_persistence.utils.exceptions import DatasetError, PersistenceError


@pytest.fixture
def batch() -> Dataset:
    """Two transitions, the second terminal."""
    transitions = (
        Transition(state=[0], action=1, next_state=[1], reward=1.0),
        Transition(state=[1], action=0, next_state=[0], reward=2.0, terminal=True),
    )
    manifest = DatasetManifest(
        env_name="toy", n_samples=2, discount=0.5, action_set=[[0.0], [1.0], [2.0]], state_dim=1
    )
    return Dataset(trajectories=(Trajectory(transitions=transitions),), manifest=manifest)


@pytest.fixture
def q() -> TabularQ:
    """Q table over two states and three actions."""
    return TabularQ(np.array([[1.0, 4.0, 2.0], [3.0, 0.0, 6.0]]))


class TestComputeTargets:
    """Test cases for compute_targets."""

    def test_optimal(self, batch: Dataset, q: TabularQ) -> None:
        """Test max bootstrapping and terminal cut-off."""
        np.testing.assert_allclose(compute_targets(q, batch, "optimal", 0.5), [1.0 + 0.5 * 6.0, 2.0])

    def test_persistent(self, batch: Dataset, q: TabularQ) -> None:
        """Test bootstrapping on the taken action."""
        np.testing.assert_allclose(compute_targets(q, batch, "persistent", 0.5), [1.0 + 0.5 * 0.0, 2.0])

    def test_evaluation_counts(self, batch: Dataset, q: TabularQ) -> None:
        """Test that optimal targets cost n |A| evaluations and persistent ones n."""
        optimal, persistent = CountingQFunction(q), CountingQFunction(q)
        compute_targets(optimal, batch, "optimal", 0.5)
        compute_targets(persistent, batch.arrays, "persistent", 0.5)
        assert (optimal.count, persistent.count) == (6, 2)

    def test_empty_batch(self, q: TabularQ) -> None:
        """Test that an empty batch is rejected."""
        manifest = DatasetManifest(env_name="toy", n_samples=0, discount=0.5, action_set=[[0.0]], state_dim=1)
        with pytest.raises(DatasetError):
            compute_targets(q, Dataset(trajectories=(), manifest=manifest), "optimal", 0.5)

    def test_unknown_mode(self, batch: Dataset, q: TabularQ) -> None:
        """Test that an unknown mode is rejected."""
        with pytest.raises(PersistenceError):
            compute_targets(q, batch, "expectation", 0.5)  # type: ignore[arg-type]


class TestPredictedOpCount:
    """Test cases for predicted_op_count."""

    @pytest.mark.parametrize(
        ("k", "expected"), [(1, 512 * 400 * 2), (2, 256 * 800 + 256 * 400), (8, 64 * 800 + 448 * 400)]
    )
    def test_counts(self, k: int, expected: int) -> None:
        """Test the closed form."""
        assert predicted_op_count(512, 400, 2, k) == expected

    def test_decreases_with_persistence(self) -> None:
        """Test that longer persistence means fewer evaluations."""
        counts = [predicted_op_count(12, 30, 3, k) for k in (1, 2, 3, 4, 6, 12)]
        assert counts == sorted(counts, reverse=True)

    def test_rejects_non_multiple(self) -> None:
        """Test the divisibility check."""
        with pytest.raises(PersistenceError):
            predicted_op_count(10, 5, 2, 3)
