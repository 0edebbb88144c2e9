from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, ClassVar

import numpy as np
from loguru import logger

from action_persistence.utils.exceptions import RegressionError


class Regressor(ABC):
    """Base class for the regressors used in the projection phase of PFQI.

    Regressors follow the usual estimator protocol: ``fit`` returns the fitted
    instance and ``predict`` maps a feature matrix to a target vector.
    """

    KIND: ClassVar[str]
    _REGISTRY: ClassVar[dict[str, type[Regressor]]] = {}

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        if "KIND" in cls.__dict__:
            Regressor._REGISTRY[cls.KIND] = cls

    @staticmethod
    def _validate_training_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Validate and coerce training data.

        Raises:
            RegressionError: If the input is empty or the shapes disagree.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] == 0 or y.shape[0] == 0:
            logger.error("Cannot fit a regressor on an empty training set")
            raise RegressionError("Cannot fit a regressor on an empty training set")
        if X.shape[0] != y.shape[0]:
            logger.error(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
            raise RegressionError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        return X, y

    @abstractmethod
    def fit(self, X: np.ndarray, y: np.ndarray) -> Regressor:
        """Fit on features ``X`` (n, d) and targets ``y`` (n,)."""

    @abstractmethod
    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict one target per row of ``X``."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serialize the fitted regressor to a JSON-compatible document."""

    @classmethod
    @abstractmethod
    def _from_dict(cls, document: dict[str, Any]) -> Regressor:
        """Rebuild a fitted regressor of this kind."""

    @staticmethod
    def from_dict(document: dict[str, Any]) -> Regressor:
        """Rebuild any fitted regressor from its serialized document.

        Raises:
            RegressionError: If the document names an unknown regressor kind.
        """
        kind = document.get("kind")
        if kind not in Regressor._REGISTRY:
            raise RegressionError(f"Unknown regressor kind: {kind}")
        return Regressor._REGISTRY[kind]._from_dict(document)


class ConstantRegressor(Regressor):
    """Regressor predicting a single constant; used for actions with no samples."""

    KIND: ClassVar[str] = "constant"

    def __init__(self, value: float = 0.0):
        """Initialize the regressor.

        Args:
            value: The constant prediction.
        """
        self.value = float(value)

    def fit(self, X: np.ndarray, y: np.ndarray) -> ConstantRegressor:
        """Fit to the target mean."""
        _, y = self._validate_training_data(X, y)
        self.value = float(y.mean())
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict the constant for every row."""
        return np.full(np.atleast_2d(np.asarray(X)).shape[0], self.value)

    def to_dict(self) -> dict[str, Any]:
        """Serialize."""
        return {"kind": self.KIND, "value": self.value}

    @classmethod
    def _from_dict(cls, document: dict[str, Any]) -> ConstantRegressor:
        return cls(value=document["value"])
