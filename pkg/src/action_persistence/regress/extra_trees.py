from __future__ import annotations

import math
from typing import Any, ClassVar

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel, ConfigDict

from action_persistence.models.regression import ExtraTreesParams
from action_persistence.regress.base import Regressor
from action_persistence.utils.exceptions import RegressionError


class ExtraTree(BaseModel):
    """Node arrays of one fitted extremely-randomized regression tree.

    Internal nodes send a sample left when ``x[feature] <= threshold``. Leaves have
    ``feature == -1`` and predict ``value`` (the mean target of their samples).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    LEAF: ClassVar[int] = -1

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        """Number of nodes."""
        return int(self.feature.shape[0])

    def to_dict(self) -> dict[str, list[float] | list[int]]:
        """Serialize the node arrays."""
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> ExtraTree:
        """Rebuild from serialized node arrays."""
        return cls(
            feature=np.asarray(document["feature"], dtype=int),
            threshold=np.asarray(document["threshold"], dtype=float),
            left=np.asarray(document["left"], dtype=int),
            right=np.asarray(document["right"], dtype=int),
            value=np.asarray(document["value"], dtype=float),
            n_samples=np.asarray(document["n_samples"], dtype=int),
            impurity=np.asarray(document["impurity"], dtype=float),
        )


class _TreeBuilder:
    """Grows one tree with the extremely-randomized splitting rule."""

    def __init__(self, params: ExtraTreesParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng

    def _n_candidates(self, n_features: int) -> int:
        if self.params.max_features == "all":
            return n_features
        if self.params.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        return min(int(self.params.max_features), n_features)

    def _best_split(self, X: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
        """Draw one random cut per candidate feature and keep the best one.

        Returns:
            ``(feature, threshold)`` maximizing the variance reduction, or None when
            no admissible split exists.
        """
        low = X.min(axis=0)
        high = X.max(axis=0)
        candidates = np.flatnonzero(high > low)
        if candidates.size == 0:
            return None
        n_candidates = self._n_candidates(X.shape[1])
        if candidates.size > n_candidates:
            candidates = np.sort(self.rng.choice(candidates, size=n_candidates, replace=False))
        cuts = self.rng.uniform(low[candidates], high[candidates])

        goes_left = X[:, candidates] <= cuts
        n_left = goes_left.sum(axis=0)
        n_right = y.shape[0] - n_left
        sum_left = y @ goes_left
        sum_right = y.sum() - sum_left
        leaf = self.params.min_samples_leaf
        admissible = (n_left >= leaf) & (n_right >= leaf)
        if not admissible.any():
            return None
        # S_l^2/n_l + S_r^2/n_r differs from the variance reduction by a node constant.
        score = np.full(candidates.size, -np.inf)
        score[admissible] = (
            sum_left[admissible] ** 2 / n_left[admissible] + sum_right[admissible] ** 2 / n_right[admissible]
        )
        best = int(np.argmax(score))
        return int(candidates[best]), float(cuts[best])

    def build(self, X: np.ndarray, y: np.ndarray) -> ExtraTree:
        """Grow a tree on ``(X, y)``."""
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        n_samples: list[int] = []
        impurity: list[float] = []

        def new_node(indices: np.ndarray) -> int:
            targets = y[indices]
            mean = float(targets.mean())
            feature.append(ExtraTree.LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(mean)
            n_samples.append(int(indices.size))
            impurity.append(float(np.sum((targets - mean) ** 2)))
            return len(feature) - 1

        stack = [(new_node(np.arange(y.shape[0])), np.arange(y.shape[0]))]
        while stack:
            node, indices = stack.pop()
            targets = y[indices]
            if indices.size < self.params.min_samples_split or targets.max() <= targets.min():
                continue
            split = self._best_split(X[indices], targets)
            if split is None:
                continue
            split_feature, split_threshold = split
            mask = X[indices, split_feature] <= split_threshold
            left_indices, right_indices = indices[mask], indices[~mask]
            feature[node] = split_feature
            threshold[node] = split_threshold
            left[node] = new_node(left_indices)
            right[node] = new_node(right_indices)
            # Right pushed first so the left subtree is grown (and draws randomness) first.
            stack.append((right[node], right_indices))
            stack.append((left[node], left_indices))

        return ExtraTree(
            feature=np.asarray(feature, dtype=int),
            threshold=np.asarray(threshold, dtype=float),
            left=np.asarray(left, dtype=int),
            right=np.asarray(right, dtype=int),
            value=np.asarray(value, dtype=float),
            n_samples=np.asarray(n_samples, dtype=int),
            impurity=np.asarray(impurity, dtype=float),
        )


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ExtraTreesParams, seed: np.random.SeedSequence) -> ExtraTree:
    return _TreeBuilder(params, np.random.default_rng(seed)).build(X, y)


class ExtraTreesRegressor(Regressor):
    """Ensemble of extremely-randomized regression trees.

    Each tree is grown on the full training set; at every node one uniformly random
    cut-point is drawn per candidate feature and the cut with the largest variance
    reduction is kept. Growth stops when a node holds fewer than
    ``min_samples_split`` samples or constant targets, and no child may hold fewer
    than ``min_samples_leaf`` samples. The ensemble predicts the mean over trees,
    so every prediction is a convex combination of training targets.
    """

    KIND: ClassVar[str] = "extra_trees"

    def __init__(self, params: ExtraTreesParams | None = None):
        """Initialize the regressor.

        Args:
            params: Hyperparameters. Uses the protocol defaults if None.
        """
        self.params = params or ExtraTreesParams()
        self.trees_: list[ExtraTree] = []
        self._packed: tuple[np.ndarray, ...] | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> ExtraTreesRegressor:
        """Grow ``n_estimators`` trees on ``(X, y)``.

        Args:
            X: Feature matrix (n, d).
            y: Target vector (n,).

        Returns:
            The fitted regressor.

        Raises:
            RegressionError: If the training set is empty.
        """
        X, y = self._validate_training_data(X, y)
        seeds = np.random.SeedSequence(self.params.seed).spawn(self.params.n_estimators)
        if self.params.n_jobs == 1:
            self.trees_ = [_grow_tree(X, y, self.params, seed) for seed in seeds]
        else:
            self.trees_ = Parallel(n_jobs=self.params.n_jobs, prefer="threads")(
                delayed(_grow_tree)(X, y, self.params, seed) for seed in seeds
            )
        self._packed = None
        logger.debug(
            f"Fitted {len(self.trees_)} extra-trees on {X.shape[0]} samples "
            f"({sum(tree.n_nodes for tree in self.trees_)} nodes)"
        )
        return self

    def _pack(self) -> tuple[np.ndarray, ...]:
        """Concatenate all trees into flat arrays with global child indices."""
        if self._packed is None:
            offsets = np.cumsum([0] + [tree.n_nodes for tree in self.trees_[:-1]])
            pairs = list(zip(self.trees_, offsets, strict=True))
            feature = np.concatenate([tree.feature for tree in self.trees_])
            threshold = np.concatenate([tree.threshold for tree in self.trees_])
            left = np.concatenate([np.where(tree.feature >= 0, tree.left + offset, -1) for tree, offset in pairs])
            right = np.concatenate([np.where(tree.feature >= 0, tree.right + offset, -1) for tree, offset in pairs])
            value = np.concatenate([tree.value for tree in self.trees_])
            self._packed = (offsets, feature, threshold, left, right, value)
        return self._packed

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict the mean over trees for every row of ``X``.

        Raises:
            RegressionError: If the regressor has not been fitted.
        """
        if not self.trees_:
            logger.error("ExtraTreesRegressor must be fitted before predicting")
            raise RegressionError("ExtraTreesRegressor must be fitted before predicting")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        roots, feature, threshold, left, right, value = self._pack()
        nodes = np.tile(roots, (X.shape[0], 1))
        while True:
            rows, cols = np.nonzero(feature[nodes] >= 0)
            if rows.size == 0:
                break
            current = nodes[rows, cols]
            goes_left = X[rows, feature[current]] <= threshold[current]
            nodes[rows, cols] = np.where(goes_left, left[current], right[current])
        return value[nodes].mean(axis=1)

    def to_dict(self) -> dict[str, Any]:
        """Serialize parameters and node arrays."""
        return {
            "kind": self.KIND,
            "params": self.params.model_dump(mode="json"),
            "trees": [tree.to_dict() for tree in self.trees_],
        }

    @classmethod
    def _from_dict(cls, document: dict[str, Any]) -> ExtraTreesRegressor:
        regressor = cls(ExtraTreesParams.model_validate(document["params"]))
        regressor.trees_ = [ExtraTree.from_dict(tree) for tree in document["trees"]]
        return regressor
