from __future__ import annotations

from typing import TYPE_CHECKING

from loguru import logger

from action_persistence.mdp.persistence import persistent_rollout, wrap_persistent_env
from action_persistence.models.dataset import Dataset, DatasetManifest, Trajectory
from action_persistence.utils.exceptions import DatasetError
from action_persistence.utils.seeding import derive_seed

if TYPE_CHECKING:
    from action_persistence.envs.base import Environment
    from action_persistence.mdp.policy import DiscretePolicy


def collect_dataset(
    env: Environment,
    policy: DiscretePolicy,
    k_sampling: int = 1,
    n_trajectories: int | None = None,
    seed: int = 0,
    in_persistent_env: bool = False,
    max_samples: int | None = None,
) -> Dataset:
    """Collect a batch dataset with a behavior policy run at persistence ``k_sampling``.

    By default every base step is recorded, intermediate repetitions included, so the
    tuples are base-MDP transitions. With ``in_persistent_env`` the policy runs at
    persistence 1 in ``wrap_persistent_env(env, k_sampling)`` and aggregated k-step
    tuples are recorded instead, with discount ``gamma ** k_sampling``.

    Args:
        env: Environment to collect from.
        policy: Behavior policy.
        k_sampling: Sampling persistence.
        n_trajectories: Number of trajectories; unbounded when only ``max_samples`` is set.
        seed: Collection seed; trajectory i uses the seed derived from ``(seed, i)``.
        in_persistent_env: Record aggregated transitions of the persistent environment.
        max_samples: Stop once this many transitions are recorded, truncating the last trajectory.

    Returns:
        The dataset and its manifest.

    Raises:
        DatasetError: If neither ``n_trajectories`` nor ``max_samples`` is given.
    """
    if n_trajectories is None and max_samples is None:
        raise DatasetError("collect_dataset needs n_trajectories or max_samples")
    if in_persistent_env:
        target, rollout_persistence = wrap_persistent_env(env, k_sampling), 1
    else:
        target, rollout_persistence = env, k_sampling

    trajectories: list[Trajectory] = []
    n_samples = 0
    index = 0
    while (n_trajectories is None or index < n_trajectories) and (max_samples is None or n_samples < max_samples):
        trajectory = persistent_rollout(
            target, policy, rollout_persistence, target.spec.horizon, derive_seed(seed, "collect", index)
        )
        if max_samples is not None and n_samples + len(trajectory) > max_samples:
            trajectory = Trajectory(transitions=trajectory.transitions[: max_samples - n_samples])
        trajectories.append(trajectory)
        n_samples += len(trajectory)
        index += 1

    manifest = DatasetManifest(
        env_name=env.spec.name,
        sampling_persistence=k_sampling,
        collected_in_persistent_env=in_persistent_env,
        seed=seed,
        n_samples=n_samples,
        discount=target.spec.discount,
        action_set=env.spec.action_set,
        state_dim=env.spec.state_dim,
    )
    terminated = sum(trajectory.transitions[-1].terminal for trajectory in trajectories)
    logger.info(
        f"Collected {n_samples} transitions in {len(trajectories)} trajectories from {env.spec.name} "
        f"(k_sampling={k_sampling}, {terminated} terminated)"
    )
    return Dataset(trajectories=tuple(trajectories), manifest=manifest)
