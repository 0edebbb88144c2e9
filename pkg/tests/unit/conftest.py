from __future__ import annotations

import numpy as np
import pytest

from action_persistence.mdp.random import random_tabular_mdp
from action_persistence.models.dataset import Dataset, DatasetManifest, Trajectory, Transition
from action_persistence.models.mdp import TabularMdp


def covering_dataset(mdp: TabularMdp) -> Dataset:
    """One single-step trajectory per state-action pair of a deterministic MDP."""
    trajectories = []
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            next_state = int(np.argmax(mdp.transition[s, a]))
            transition = Transition(state=[s], action=a, next_state=[next_state], reward=mdp.reward[s, a])
            trajectories.append(Trajectory(transitions=(transition,)))
    manifest = DatasetManifest(
        env_name="deterministic",
        n_samples=len(trajectories),
        discount=mdp.discount,
        action_set=[[float(a)] for a in range(mdp.n_actions)],
        state_dim=1,
    )
    return Dataset(trajectories=tuple(trajectories), manifest=manifest)


@pytest.fixture
def deterministic_mdp() -> TabularMdp:
    """Random 5-state, 2-action MDP with deterministic transitions."""
    return random_tabular_mdp(np.random.default_rng(0), 5, 2, 0.9, branching=1)


@pytest.fixture
def covering(deterministic_mdp: TabularMdp) -> Dataset:
    """Dataset holding every state-action pair of the deterministic MDP once."""
    return covering_dataset(deterministic_mdp)
