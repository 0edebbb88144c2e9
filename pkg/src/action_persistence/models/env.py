from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator


class EnvSpec(BaseModel):
    """Pydantic model describing a time-discretized environment.

    The horizon and discount are derived from the original ones through the
    timestep reduction factor ``m`` and the persistence ``k`` of the environment:
    ``H = ceil(m * H_original / k)`` and ``gamma = (gamma_original ** (1 / m)) ** k``.
    For a base environment (``k = 1``) these reduce to ``H = m * H_original`` and
    ``gamma = gamma_original ** (1 / m)``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    state_dim: int = Field(ge=1)
    action_set: list[list[float]]
    original_timestep: float = Field(gt=0.0)
    discretization_factor: int = Field(default=1, ge=1)
    original_horizon: int = Field(ge=1)
    original_discount: float = Field(ge=0.0, lt=1.0)
    persistence: int = Field(default=1, ge=1)
    reward_description: str = ""

    @field_validator("action_set")
    @classmethod
    def validate_action_set(cls, v: list[list[float]]) -> list[list[float]]:
        """Validate action set."""
        if not v:
            raise ValueError("action_set must contain at least one action")
        return v

    @computed_field  # type: ignore[prop-decorator]
    @property
    def base_timestep(self) -> float:
        """Integrator timestep Δt₀ = Δt_original / m."""
        return self.original_timestep / self.discretization_factor

    @computed_field  # type: ignore[prop-decorator]
    @property
    def horizon(self) -> int:
        """Episode horizon in decision steps."""
        return math.ceil(self.discretization_factor * self.original_horizon / self.persistence)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def discount(self) -> float:
        """Discount per decision step."""
        base = self.original_discount
        if self.discretization_factor > 1:
            base = float(base ** (1.0 / self.discretization_factor))
        return base if self.persistence == 1 else float(base**self.persistence)

    @property
    def n_actions(self) -> int:
        """Number of primitive actions."""
        return len(self.action_set)


class ProtocolDefaults(BaseModel):
    """Pydantic model for the per-environment batch protocol.

    Attributes:
        sampling_persistence: Persistence of the uniform behavior policy.
        n_trajectories: Number of collected trajectories.
        max_samples: Cap on the number of transitions; collection stops once reached.
        iterations: Number of PFQI iterations J.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    sampling_persistence: int = Field(default=1, ge=1)
    n_trajectories: int | None = Field(default=None, ge=1)
    max_samples: int | None = Field(default=None, ge=1)
    iterations: int = Field(ge=1)
