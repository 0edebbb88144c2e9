from __future__ import annotations

import numpy as np
import pytest

from action_persistence.regress.base import Regressor
from action_persistence.regress.oracles import KNeighborsRegressor, TableRegressor
from action_persistence.utils.exceptions import RegressionError


class TestTableRegressor:
    """Test cases for TableRegressor."""

    def test_averages_per_key(self) -> None:
        """Test exact lookup of repeated rows."""
        X = np.array([[0.0], [0.0], [1.0]])
        regressor = TableRegressor().fit(X, np.array([1.0, 3.0, 5.0]))
        np.testing.assert_allclose(regressor.predict(np.array([[1.0], [0.0]])), [5.0, 2.0])

    def test_unseen_rows_use_global_mean(self) -> None:
        """Test the fallback for keys absent from training."""
        regressor = TableRegressor().fit(np.array([[0.0], [1.0]]), np.array([2.0, 4.0]))
        assert regressor.predict(np.array([[7.0]]))[0] == pytest.approx(3.0)

    def test_serialization(self) -> None:
        """Test that a rebuilt table predicts identically."""
        X = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        regressor = TableRegressor().fit(X, np.array([1.0, 2.0, 4.0]))
        rebuilt = Regressor.from_dict(regressor.to_dict())
        np.testing.assert_array_equal(rebuilt.predict(X), regressor.predict(X))


class TestKNeighborsRegressor:
    """Test cases for KNeighborsRegressor."""

    def test_nearest_average(self) -> None:
        """Test the uniform average over neighbors."""
        X = np.array([[0.0], [1.0], [10.0]])
        regressor = KNeighborsRegressor(n_neighbors=2).fit(X, np.array([0.0, 2.0, 100.0]))
        assert regressor.predict(np.array([[0.4]]))[0] == pytest.approx(1.0)

    def test_neighbors_capped_by_training_size(self) -> None:
        """Test that asking for more neighbors than rows averages everything."""
        regressor = KNeighborsRegressor(n_neighbors=10).fit(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        assert regressor.predict(np.array([[5.0]]))[0] == pytest.approx(2.0)

    def test_predict_before_fit(self) -> None:
        """Test that an unfitted regressor fails."""
        with pytest.raises(RegressionError):
            KNeighborsRegressor().predict(np.zeros((1, 1)))

    def test_rejects_zero_neighbors(self) -> None:
        """Test the neighbor count check."""
        with pytest.raises(RegressionError):
            KNeighborsRegressor(n_neighbors=0)
