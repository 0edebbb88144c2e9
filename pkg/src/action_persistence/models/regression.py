from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ExtraTreesParams(BaseModel):
    """Pydantic model for extremely-randomized-trees hyperparameters.

    Defaults follow the experimental setting used for every classic-control
    protocol: 100 trees, ``min_samples_split=5``, ``min_samples_leaf=2`` and all
    features considered at each split.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_estimators: int = Field(default=100, ge=1)
    min_samples_split: int = Field(default=5, ge=2)
    min_samples_leaf: int = Field(default=2, ge=1)
    max_features: Literal["all", "sqrt"] | int = "all"
    seed: int = 0
    n_jobs: int = 1

    @model_validator(mode="after")
    def validate_max_features(self) -> ExtraTreesParams:
        """Validate max_features when given as a count."""
        if isinstance(self.max_features, int) and self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        return self


class RegressorConfig(BaseModel):
    """Pydantic model selecting the regressor used by PFQI."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["extra_trees", "table", "knn"] = "extra_trees"
    extra_trees: ExtraTreesParams = Field(default_factory=ExtraTreesParams)
    n_neighbors: int = Field(default=5, ge=1)
