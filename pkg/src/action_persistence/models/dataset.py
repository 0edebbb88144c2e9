from __future__ import annotations

import hashlib
from functools import cached_property
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Transition(BaseModel):
    """Pydantic model for one base-MDP (or aggregated k-step) transition."""

    model_config = ConfigDict(frozen=True)

    state: tuple[float, ...]
    action: int = Field(ge=0)
    next_state: tuple[float, ...]
    reward: float
    # Environment-absorbing; horizon truncation keeps this False.
    terminal: bool = False

    @field_validator("state", "next_state", mode="before")
    @classmethod
    def validate_vector(cls, v: Any) -> tuple[float, ...]:
        """Flatten array-likes (or a bare state index) into a tuple of floats."""
        return tuple(float(x) for x in np.ravel(np.asarray(v, dtype=float)))


class Trajectory(BaseModel):
    """Pydantic model for an ordered, chained list of transitions."""

    model_config = ConfigDict(frozen=True)

    transitions: tuple[Transition, ...]

    @model_validator(mode="after")
    def validate_chain(self) -> Trajectory:
        """Validate that consecutive transitions are chained."""
        if not self.transitions:
            raise ValueError("a trajectory needs at least one transition")
        for t, (current, following) in enumerate(zip(self.transitions, self.transitions[1:], strict=False)):
            if current.next_state != following.state:
                raise ValueError(f"transition {t} next_state does not match transition {t + 1} state")
        return self

    @property
    def initial_state(self) -> tuple[float, ...]:
        """First state S_0 of the trajectory."""
        return self.transitions[0].state

    def __len__(self) -> int:
        return len(self.transitions)


class DatasetManifest(BaseModel):
    """Pydantic model recording how a dataset was collected."""

    model_config = ConfigDict(frozen=True)

    env_name: str
    sampling_persistence: int = Field(default=1, ge=1)
    collected_in_persistent_env: bool = False
    seed: int | None = None
    n_samples: int = Field(ge=0)
    discount: float
    action_set: list[list[float]]
    state_dim: int = Field(ge=1)

    @property
    def n_actions(self) -> int:
        """Number of primitive actions."""
        return len(self.action_set)


class TransitionArrays(BaseModel):
    """Column view of a dataset, used by every numerical consumer."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    trajectory_ids: np.ndarray
    steps: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])


class Dataset(BaseModel):
    """Pydantic model for an immutable batch of trajectories plus its manifest."""

    model_config = ConfigDict(frozen=True)

    trajectories: tuple[Trajectory, ...]
    manifest: DatasetManifest

    @model_validator(mode="after")
    def validate_manifest(self) -> Dataset:
        """Validate the manifest against the trajectories."""
        total = sum(len(trajectory) for trajectory in self.trajectories)
        if total != self.manifest.n_samples:
            raise ValueError(f"manifest.n_samples={self.manifest.n_samples} but dataset holds {total}")
        for trajectory in self.trajectories:
            for transition in trajectory.transitions:
                if transition.action >= self.manifest.n_actions:
                    raise ValueError(f"action {transition.action} out of range for {self.manifest.n_actions} actions")
                if len(transition.state) != self.manifest.state_dim:
                    raise ValueError(f"state of size {len(transition.state)}, expected {self.manifest.state_dim}")
        return self

    @property
    def n_samples(self) -> int:
        """Total number of transitions."""
        return self.manifest.n_samples

    @property
    def discount(self) -> float:
        """Discount of the generating environment."""
        return self.manifest.discount

    @property
    def n_actions(self) -> int:
        """Number of actions of the generating environment."""
        return self.manifest.n_actions

    @cached_property
    def arrays(self) -> TransitionArrays:
        """Column arrays of all transitions, in trajectory order."""
        rows = [
            (i, t, transition)
            for i, trajectory in enumerate(self.trajectories)
            for t, transition in enumerate(trajectory.transitions)
        ]
        dim = self.manifest.state_dim
        arrays = TransitionArrays(
            trajectory_ids=np.array([i for i, _, _ in rows], dtype=int),
            steps=np.array([t for _, t, _ in rows], dtype=int),
            states=np.array([tr.state for _, _, tr in rows], dtype=float).reshape(-1, dim),
            actions=np.array([tr.action for _, _, tr in rows], dtype=int),
            rewards=np.array([tr.reward for _, _, tr in rows], dtype=float),
            next_states=np.array([tr.next_state for _, _, tr in rows], dtype=float).reshape(-1, dim),
            terminals=np.array([tr.terminal for _, _, tr in rows], dtype=bool),
        )
        for column in arrays.__dict__.values():
            column.setflags(write=False)
        return arrays

    @cached_property
    def initial_states(self) -> np.ndarray:
        """Trajectory heads S_0^i, one row per trajectory."""
        return np.array([trajectory.initial_state for trajectory in self.trajectories], dtype=float).reshape(
            -1, self.manifest.state_dim
        )

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over the transition content; equal datasets share a fingerprint."""
        digest = hashlib.sha256()
        arrays = self.arrays
        for column in (
            arrays.trajectory_ids,
            arrays.states,
            arrays.actions,
            arrays.rewards,
            arrays.next_states,
            arrays.terminals,
        ):
            digest.update(np.ascontiguousarray(column).tobytes())
        digest.update(repr(self.manifest.discount).encode("utf-8"))
        return digest.hexdigest()
