from __future__ import annotations

import numpy as np
import pytest

from action_persistence.models.regression import ExtraTreesParams
from action_persistence.regress.base import Regressor
from action_persistence.regress.extra_trees import ExtraTree, ExtraTreesRegressor
from action_persistence.utils.exceptions import RegressionError


@pytest.fixture
def step_data() -> tuple[np.ndarray, np.ndarray]:
    """Noisy step function on two features, the second irrelevant."""
    rng = np.random.default_rng(0)
    X = rng.uniform(-1.0, 1.0, size=(300, 2))
    y = np.where(X[:, 0] > 0.0, 1.0, -1.0) + rng.normal(0.0, 0.05, size=300)
    return X, y


class TestExtraTreesRegressor:
    """Test cases for ExtraTreesRegressor."""

    def test_fits_step_function(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test accuracy away from the discontinuity."""
        X, y = step_data
        regressor = ExtraTreesRegressor(ExtraTreesParams(n_estimators=20)).fit(X, y)
        predictions = regressor.predict(np.array([[-0.5, 0.3], [0.5, -0.3]]))
        np.testing.assert_allclose(predictions, [-1.0, 1.0], atol=0.15)

    def test_predictions_stay_in_target_range(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that predictions are convex combinations of targets."""
        X, y = step_data
        regressor = ExtraTreesRegressor(ExtraTreesParams(n_estimators=10)).fit(X, y)
        predictions = regressor.predict(np.random.default_rng(1).uniform(-3.0, 3.0, size=(100, 2)))
        assert predictions.min() >= y.min() - 1e-12
        assert predictions.max() <= y.max() + 1e-12

    def test_leaf_size(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test the minimum leaf size."""
        X, y = step_data
        regressor = ExtraTreesRegressor(ExtraTreesParams(n_estimators=5, min_samples_leaf=4)).fit(X, y)
        for tree in regressor.trees_:
            leaves = tree.feature == ExtraTree.LEAF
            assert tree.n_samples[leaves].min() >= 4

    def test_seeded(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test reproducibility across seeds and thread counts."""
        X, y = step_data
        queries = np.random.default_rng(2).uniform(-1.0, 1.0, size=(50, 2))
        serial = ExtraTreesRegressor(ExtraTreesParams(n_estimators=8, seed=3)).fit(X, y).predict(queries)
        threaded = ExtraTreesRegressor(ExtraTreesParams(n_estimators=8, seed=3, n_jobs=2)).fit(X, y).predict(queries)
        other = ExtraTreesRegressor(ExtraTreesParams(n_estimators=8, seed=4)).fit(X, y).predict(queries)
        np.testing.assert_array_equal(serial, threaded)
        assert not np.array_equal(serial, other)

    def test_fully_grown_tree_memorizes(self) -> None:
        """Test that one unpruned tree over all features reproduces its training targets."""
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(60, 3))
        y = rng.normal(size=60)
        params = ExtraTreesParams(n_estimators=1, min_samples_split=2, min_samples_leaf=1, max_features="all")
        regressor = ExtraTreesRegressor(params).fit(X, y)
        np.testing.assert_allclose(regressor.predict(X), y, atol=1e-12)

    def test_row_order_invariant(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that shuffling the training rows leaves the predictions unchanged."""
        X, y = step_data
        order = np.random.default_rng(6).permutation(y.shape[0])
        queries = np.random.default_rng(2).uniform(-1.0, 1.0, size=(50, 2))
        params = ExtraTreesParams(n_estimators=10, seed=5)
        original = ExtraTreesRegressor(params).fit(X, y).predict(queries)
        shuffled = ExtraTreesRegressor(params).fit(X[order], y[order]).predict(queries)
        np.testing.assert_allclose(shuffled, original, atol=1e-9)

    def test_constant_targets_give_single_leaf(self) -> None:
        """Test that constant targets stop growth at the root."""
        X = np.random.default_rng(0).normal(size=(20, 3))
        regressor = ExtraTreesRegressor(ExtraTreesParams(n_estimators=3)).fit(X, np.full(20, 4.0))
        assert all(tree.n_nodes == 1 for tree in regressor.trees_)
        np.testing.assert_array_equal(regressor.predict(X[:2]), [4.0, 4.0])

    def test_serialization(self, step_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that a rebuilt ensemble predicts identically."""
        X, y = step_data
        regressor = ExtraTreesRegressor(ExtraTreesParams(n_estimators=4)).fit(X, y)
        rebuilt = Regressor.from_dict(regressor.to_dict())
        np.testing.assert_array_equal(rebuilt.predict(X[:20]), regressor.predict(X[:20]))

    def test_predict_before_fit(self) -> None:
        """Test that an unfitted ensemble fails."""
        with pytest.raises(RegressionError):
            ExtraTreesRegressor().predict(np.zeros((1, 2)))


class TestExtraTreesParams:
    """Test cases for ExtraTreesParams."""

    def test_defaults(self) -> None:
        """Test the protocol defaults."""
        params = ExtraTreesParams()
        assert (params.n_estimators, params.min_samples_split, params.min_samples_leaf) == (100, 5, 2)
        assert params.max_features == "all"

    def test_rejects_zero_max_features(self) -> None:
        """Test the feature count check."""
        with pytest.raises(ValueError):
            ExtraTreesParams(max_features=0)
