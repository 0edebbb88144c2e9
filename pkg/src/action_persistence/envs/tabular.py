from __future__ import annotations

import numpy as np

from action_persistence.envs.base import SimulatedEnvironment
from action_persistence.models.env import EnvSpec
from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import EnvironmentConfigError


class TabularEnv(SimulatedEnvironment):
    """Sampled view of a tabular MDP.

    States are observed as one-element vectors holding the state index. Each step
    consumes one uniform draw for the next state, plus one normal draw when reward
    noise is enabled. The MDP has no terminal states; episodes end at the horizon.
    """

    def __init__(
        self,
        mdp: TabularMdp,
        name: str = "tabular",
        horizon: int = 100,
        initial_distribution: np.ndarray | None = None,
        reward_noise_std: float = 0.0,
    ):
        """Initialize the environment.

        Args:
            mdp: The MDP to sample from.
            name: Environment name recorded in manifests.
            horizon: Episode length.
            initial_distribution: Distribution of S_0 over states; uniform if None.
            reward_noise_std: Standard deviation of Gaussian noise added to rewards.

        Raises:
            EnvironmentConfigError: If the initial distribution or noise level is invalid.
        """
        spec = EnvSpec(
            name=name,
            state_dim=1,
            action_set=[[float(a)] for a in range(mdp.n_actions)],
            original_timestep=1.0,
            original_horizon=horizon,
            original_discount=mdp.discount,
            reward_description="expected reward table r[s, a]",
        )
        super().__init__(spec)
        if initial_distribution is None:
            initial_distribution = np.full(mdp.n_states, 1.0 / mdp.n_states)
        initial_distribution = np.asarray(initial_distribution, dtype=float)
        if (
            initial_distribution.shape != (mdp.n_states,)
            or np.any(initial_distribution < 0.0)
            or abs(initial_distribution.sum() - 1.0) > Constants.DISTRIBUTION_ATOL
        ):
            raise EnvironmentConfigError("initial_distribution must be a distribution over the MDP states")
        if reward_noise_std < 0.0:
            raise EnvironmentConfigError(f"reward_noise_std must be >= 0, got {reward_noise_std}")
        self.mdp = mdp
        self.initial_distribution = initial_distribution
        self.reward_noise_std = reward_noise_std
        self._cumulative = np.cumsum(mdp.transition, axis=2)

    @staticmethod
    def _sample(cumulative: np.ndarray, draw: float) -> int:
        return int(min(np.searchsorted(cumulative, draw, side="right"), cumulative.shape[0] - 1))

    def _initial_state(self) -> np.ndarray:
        return np.array([self._sample(np.cumsum(self.initial_distribution), self.rng.random())], dtype=float)

    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        s = int(state[0])
        next_state = self._sample(self._cumulative[s, action], self.rng.random())
        reward = float(self.mdp.reward[s, action])
        if self.reward_noise_std > 0.0:
            reward += float(self.rng.normal(0.0, self.reward_noise_std))
        return np.array([next_state], dtype=float), reward, False
