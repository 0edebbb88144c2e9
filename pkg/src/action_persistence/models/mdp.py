from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from action_persistence.utils.constants import Constants


class TabularMdp(BaseModel):
    """Pydantic model for an explicit finite MDP with expected rewards.

    Attributes:
        transition: Tensor ``P[s, a, s']`` of transition probabilities.
        reward: Table ``r[s, a]`` of expected rewards.
        discount: Discount factor in ``[0, 1)``.
        r_max: Upper bound on ``|r|``. Defaults to the largest absolute reward.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    r_max: float | None = None

    @field_validator("transition", "reward", mode="before")
    @classmethod
    def validate_array(cls, v: Any) -> np.ndarray:
        """Coerce nested lists to read-only float arrays."""
        array = np.array(v, dtype=float)
        array.setflags(write=False)
        return array

    @field_validator("discount")
    @classmethod
    def validate_discount(cls, v: float) -> float:
        """Validate discount."""
        if not 0.0 <= v < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {v}")
        return v

    @model_validator(mode="after")
    def validate_tables(self) -> TabularMdp:
        """Validate shapes, row-stochasticity and the reward bound."""
        if self.transition.ndim != 3 or self.transition.shape[0] != self.transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {self.transition.shape}")
        if self.reward.shape != self.transition.shape[:2]:
            raise ValueError(f"reward must have shape {self.transition.shape[:2]}, got {self.reward.shape}")
        if np.any(self.transition < 0.0):
            raise ValueError("transition contains negative probabilities")
        row_sums = self.transition.sum(axis=2)
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=Constants.PROBABILITY_ATOL):
            worst = float(np.max(np.abs(row_sums - 1.0)))
            raise ValueError(f"transition rows must sum to 1, worst deviation {worst:.3e}")
        if not np.all(np.isfinite(self.reward)):
            raise ValueError("reward contains non-finite entries")
        largest = float(np.max(np.abs(self.reward))) if self.reward.size else 0.0
        if self.r_max is None:
            object.__setattr__(self, "r_max", largest)
        elif largest > self.r_max * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"|r| reaches {largest}, above r_max={self.r_max}")
        return self

    @property
    def n_states(self) -> int:
        """Number of states."""
        return int(self.transition.shape[0])

    @property
    def n_actions(self) -> int:
        """Number of actions."""
        return int(self.transition.shape[1])

    @property
    def reward_bound(self) -> float:
        """The validated reward bound ``r_max``."""
        return float(self.r_max or 0.0)

    def to_document(self) -> dict[str, Any]:
        """Dump to the tabular-file JSON document layout."""
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "P": self.transition.tolist(),
            "r": self.reward.tolist(),
            "gamma": self.discount,
        }

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> TabularMdp:
        """Build from the tabular-file JSON document layout.

        Args:
            document: Mapping with keys ``n_states``, ``n_actions``, ``P``, ``r``, ``gamma``.

        Returns:
            The validated MDP.

        Raises:
            ValueError: If the declared sizes disagree with the tables.
        """
        mdp = cls(transition=document["P"], reward=document["r"], discount=document["gamma"])
        if mdp.n_states != int(document["n_states"]) or mdp.n_actions != int(document["n_actions"]):
            raise ValueError(
                f"declared sizes ({document['n_states']}, {document['n_actions']}) do not match "
                f"tables ({mdp.n_states}, {mdp.n_actions})"
            )
        return mdp
