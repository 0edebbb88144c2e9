from __future__ import annotations

import hashlib
import json
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from action_persistence.models.pfqi import PfqiConfig


class EnvConfig(BaseModel):
    """Pydantic model naming an environment and its overrides."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "cartpole"
    # Partial EnvSpec (e.g. discretization_factor, original_horizon).
    overrides: dict[str, Any] = Field(default_factory=dict)
    # Builder parameters (e.g. R and gamma of the counterexample, path of a tabular file).
    params: dict[str, Any] = Field(default_factory=dict)


class CollectConfig(BaseModel):
    """Pydantic model for dataset collection; ``None`` fields take protocol defaults."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    policy: Literal["uniform", "greedy"] = "uniform"
    # Q-function JSON (e.g. a run's model.json) the greedy behavior policy acts on.
    behavior_model: str | None = None
    sampling_persistence: int | None = Field(default=None, ge=1)
    in_persistent_env: bool = False
    n_trajectories: int | None = Field(default=None, ge=1)
    max_samples: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def validate_behavior_model(self) -> CollectConfig:
        """Validate that a greedy behavior policy names its Q-function."""
        if self.policy == "greedy" and self.behavior_model is None:
            raise ValueError("collect.policy=greedy needs collect.behavior_model")
        return self


class SelectConfig(BaseModel):
    """Pydantic model for the candidate persistence set K."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    candidates: list[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])

    @field_validator("candidates")
    @classmethod
    def validate_candidates(cls, v: list[int]) -> list[int]:
        """Validate candidates."""
        if not v:
            raise ValueError("the candidate set K must not be empty")
        if any(k < 1 for k in v):
            raise ValueError(f"persistences must be >= 1, got {v}")
        return sorted(set(v))


class EvalConfig(BaseModel):
    """Pydantic model for Monte-Carlo evaluation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_episodes: int = Field(default=10, ge=1)
    # Execution persistences k'; None evaluates every policy at its own k only.
    cross: list[int] | None = None
    include_uniform: bool = True
    curve_every: int = Field(default=0, ge=0)
    curve_episodes: int = Field(default=0, ge=0)


class ExperimentConfig(BaseModel):
    """Pydantic model for a full persistence experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    env: EnvConfig = Field(default_factory=EnvConfig)
    collect: CollectConfig = Field(default_factory=CollectConfig)
    pfqi: PfqiConfig = Field(default_factory=lambda: PfqiConfig(iterations=512))
    select: SelectConfig = Field(default_factory=SelectConfig)
    evaluate: EvalConfig = Field(default_factory=EvalConfig)
    n_seeds: int = Field(default=10, ge=1)
    master_seed: int = 0
    output_dir: str = "results"
    n_jobs: int = 1

    @model_validator(mode="after")
    def validate_divisibility(self) -> ExperimentConfig:
        """Validate that every candidate persistence divides J."""
        offending = [k for k in self.select.candidates if self.pfqi.iterations % k != 0]
        if offending:
            raise ValueError(
                f"iterations J={self.pfqi.iterations} is not a multiple of persistences {offending}"
            )
        return self

    @property
    def execution_persistences(self) -> list[int]:
        """Persistences k' used for evaluation, in addition to each k itself."""
        return sorted(set(self.evaluate.cross or []))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump, ignoring where and how fast it runs."""
        document = self.model_dump(mode="json", exclude={"output_dir", "n_jobs"})
        canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
