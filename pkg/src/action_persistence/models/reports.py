from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


class BoundReport(BaseModel):
    """Pydantic model for one evaluation of the persistence performance-loss bound.

    Attributes:
        k: Persistence.
        p: Order of the weighted norms.
        lhs: ``||Q^pi - Q^pi_k||_{p,rho}``.
        coefficient: ``gamma (1 - gamma^(k-1)) / ((1 - gamma)(1 - gamma^k))``.
        dissimilarity_norm: ``||d^pi_{Q_k}||_{p,eta}``.
        rhs: ``coefficient * dissimilarity_norm``.
        eta_weights: The state-action measure eta, ``None`` for k = 1.
        tail_bound: Mass of the neglected tail when eta was summed by truncation.
    """

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    p: float = Field(ge=1.0)
    lhs: float = Field(ge=0.0)
    coefficient: float = Field(ge=0.0)
    dissimilarity_norm: float = Field(ge=0.0)
    rhs: float = Field(ge=0.0)
    eta_weights: list[list[float]] | None = None
    tail_bound: float = 0.0

    @property
    def holds(self) -> bool:
        """Whether ``lhs <= rhs`` up to solver tolerance."""
        return self.lhs <= self.rhs + 1e-8


class SelectionLowerBound(BaseModel):
    """Pydantic model for the exact check of the persistence-selection lower bound."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    true_return: float
    estimated_return: float
    residual: float = Field(ge=0.0)
    bound: float

    @property
    def holds(self) -> bool:
        """Whether the true return dominates the bound up to solver tolerance."""
        return self.true_return >= self.bound - 1e-8


class SelectionEntry(BaseModel):
    """Pydantic model for one candidate persistence in a selection report."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    j_hat: float
    residual: float = Field(ge=0.0)
    index: float


class SelectionReport(BaseModel):
    """Pydantic model for the outcome of persistence selection."""

    model_config = ConfigDict(frozen=True)

    entries: list[SelectionEntry]
    chosen: int

    @model_validator(mode="after")
    def validate_chosen(self) -> SelectionReport:
        """Validate that chosen attains the maximum index, ties toward smaller k."""
        if not self.entries:
            raise ValueError("a selection report needs at least one entry")
        best = max(self.entries, key=lambda entry: (entry.index, -entry.k))
        if best.k != self.chosen:
            raise ValueError(f"chosen={self.chosen} but the index is maximized by k={best.k}")
        return self

    def rows(self) -> list[dict[str, float | int | bool]]:
        """Flatten to ``k,j_hat,residual,index,chosen`` rows."""
        return [
            {
                "k": entry.k,
                "j_hat": entry.j_hat,
                "residual": entry.residual,
                "index": entry.index,
                "chosen": entry.k == self.chosen,
            }
            for entry in self.entries
        ]


class EvalEntry(BaseModel):
    """Pydantic model for the rollouts of one policy at one execution persistence."""

    model_config = ConfigDict(frozen=True)

    seed: int
    k: int = Field(ge=1)
    k_prime: int = Field(ge=1)
    policy: Literal["greedy", "uniform"] = "greedy"
    returns: list[float]
    undiscounted_returns: list[float]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mean(self) -> float:
        """Mean discounted return."""
        return float(np.mean(self.returns))

    @computed_field  # type: ignore[prop-decorator]
    @property
    def std(self) -> float:
        """Sample standard deviation of the discounted return."""
        return float(np.std(self.returns, ddof=1)) if len(self.returns) > 1 else 0.0


class EvalAggregate(BaseModel):
    """Pydantic model for one (k, k') cell aggregated over seeds."""

    model_config = ConfigDict(frozen=True)

    k: int
    k_prime: int
    policy: Literal["greedy", "uniform"]
    mean: float
    std: float
    undiscounted_mean: float
    undiscounted_std: float
    n_seeds: int


class EvalReport(BaseModel):
    """Pydantic model for Monte-Carlo evaluations, raw episodes included."""

    model_config = ConfigDict(frozen=True)

    entries: list[EvalEntry]

    def aggregate(self) -> list[EvalAggregate]:
        """Mean and sample std across per-seed means, for every (k, k', policy) cell."""
        cells: dict[tuple[int, int, str], list[EvalEntry]] = {}
        for entry in self.entries:
            cells.setdefault((entry.k, entry.k_prime, entry.policy), []).append(entry)
        aggregates = []
        for (k, k_prime, policy), entries in sorted(cells.items()):
            means = np.array([entry.mean for entry in entries])
            undiscounted = np.array([float(np.mean(entry.undiscounted_returns)) for entry in entries])
            ddof = 1 if len(entries) > 1 else 0
            aggregates.append(
                EvalAggregate(
                    k=k,
                    k_prime=k_prime,
                    policy=policy,  # type: ignore[arg-type]
                    mean=float(means.mean()),
                    std=float(means.std(ddof=ddof)),
                    undiscounted_mean=float(undiscounted.mean()),
                    undiscounted_std=float(undiscounted.std(ddof=ddof)),
                    n_seeds=len(entries),
                )
            )
        return aggregates

    def means(self, seed: int) -> dict[int, float]:
        """Greedy-policy mean return at k' = k for one seed, keyed by k."""
        return {
            entry.k: entry.mean
            for entry in self.entries
            if entry.seed == seed and entry.policy == "greedy" and entry.k == entry.k_prime
        }


class CheckFailure(BaseModel):
    """Pydantic model for one failed verification check, with the instance that broke it."""

    model_config = ConfigDict(frozen=True)

    check: str
    detail: dict[str, Any] = Field(default_factory=dict)


class SuiteResult(BaseModel):
    """Pydantic model for the outcome of one verification suite."""

    model_config = ConfigDict(frozen=True)

    name: str
    seed: int
    n_checks: int = Field(ge=0)
    failures: list[CheckFailure] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """Whether every check of the suite passed."""
        return not self.failures


class VerifyReport(BaseModel):
    """Pydantic model for a machine-readable pass/fail verification report."""

    model_config = ConfigDict(frozen=True)

    suites: list[SuiteResult]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """Whether every suite passed."""
        return all(suite.passed for suite in self.suites)
