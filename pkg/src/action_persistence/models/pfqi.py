from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from action_persistence.models.regression import RegressorConfig


class PfqiConfig(BaseModel):
    """Pydantic model for one Persistent Fitted Q-Iteration run.

    Attributes:
        persistence: Target persistence k.
        iterations: Number of iterations J; must be a multiple of k.
        regressor: Regressor used in the projection phase.
        discount: Discount override; ``None`` takes the dataset manifest discount.
        snapshot_every: Store Q^(j) every this many iterations; ``None`` means every k
            iterations and ``0`` disables snapshots.
        continuation: Run k extra iterations after J and keep Q^(J+k) for selection.
        seed: Run seed; the regressor seed of iteration j is derived from (seed, j).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    persistence: int = Field(default=1, ge=1)
    iterations: int = Field(ge=1)
    regressor: RegressorConfig = Field(default_factory=RegressorConfig)
    discount: float | None = Field(default=None, ge=0.0, lt=1.0)
    snapshot_every: int | None = Field(default=None, ge=0)
    continuation: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def validate_divisibility(self) -> PfqiConfig:
        """Validate that J is a multiple of k."""
        if self.iterations % self.persistence != 0:
            raise ValueError(
                f"iterations J={self.iterations} must be a multiple of persistence k={self.persistence}"
            )
        return self

    @property
    def snapshot_cadence(self) -> int:
        """Effective snapshot cadence (0 when disabled)."""
        return self.persistence if self.snapshot_every is None else self.snapshot_every


class IterationStats(BaseModel):
    """Pydantic model for the targets and cost of one PFQI iteration."""

    model_config = ConfigDict(frozen=True)

    iteration: int = Field(ge=0)
    mode: Literal["optimal", "persistent"]
    y_mean: float
    y_min: float
    y_max: float
    fit_seconds: float = Field(ge=0.0)
    eval_count: int = Field(ge=0)
