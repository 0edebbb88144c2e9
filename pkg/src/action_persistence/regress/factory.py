from __future__ import annotations

from typing import TYPE_CHECKING

from action_persistence.regress.extra_trees import ExtraTreesRegressor
from action_persistence.regress.oracles import KNeighborsRegressor, TableRegressor

if TYPE_CHECKING:
    from action_persistence.models.regression import RegressorConfig
    from action_persistence.regress.base import Regressor


def make_regressor(config: RegressorConfig, seed: int) -> Regressor:
    """Create an unfitted regressor.

    Args:
        config: Regressor selection and hyperparameters.
        seed: Seed for randomized regressors; replaces ``config.extra_trees.seed``.

    Returns:
        A fresh regressor instance.
    """
    if config.kind == "table":
        return TableRegressor()
    if config.kind == "knn":
        return KNeighborsRegressor(n_neighbors=config.n_neighbors)
    return ExtraTreesRegressor(config.extra_trees.model_copy(update={"seed": seed}))
