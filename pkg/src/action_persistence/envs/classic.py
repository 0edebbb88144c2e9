"""Classic-control simulators integrated at the base timestep ``dt0 = dt_original / m``.

The dynamics follow the canonical open-source formulations; only the integrator
step changes with the discretization factor, physical constants stay fixed.
States are the raw physical state vectors.
"""

from __future__ import annotations

import math
from typing import ClassVar

import numpy as np

from action_persistence.envs.base import SimulatedEnvironment
from action_persistence.models.env import EnvSpec


def wrap_angle(angle: float) -> float:
    """Map an angle to ``[-pi, pi)``."""
    return ((angle + math.pi) % (2.0 * math.pi)) - math.pi


class CartPoleEnv(SimulatedEnvironment):
    """Cart-pole balancing with the explicit Euler update; +1 per step until the pole falls."""

    DEFAULT_SPEC: ClassVar[EnvSpec] = EnvSpec(
        name="cartpole",
        state_dim=4,
        action_set=[[-1.0], [1.0]],
        original_timestep=0.02,
        discretization_factor=4,
        original_horizon=128,
        original_discount=0.99,
        reward_description="+1 per step while |x| <= 2.4 and |theta| <= 12 degrees",
    )
    GRAVITY: ClassVar[float] = 9.8
    MASS_CART: ClassVar[float] = 1.0
    MASS_POLE: ClassVar[float] = 0.1
    HALF_LENGTH: ClassVar[float] = 0.5
    FORCE_MAG: ClassVar[float] = 10.0
    X_THRESHOLD: ClassVar[float] = 2.4
    THETA_THRESHOLD: ClassVar[float] = 12 * 2 * math.pi / 360

    def __init__(self, spec: EnvSpec | None = None):
        """Initialize the environment.

        Args:
            spec: Environment description; the protocol defaults if None.
        """
        super().__init__(spec or self.DEFAULT_SPEC)

    def _initial_state(self) -> np.ndarray:
        return self.rng.uniform(-0.05, 0.05, size=4)

    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        x, x_dot, theta, theta_dot = state
        force = self.spec.action_set[action][0] * self.FORCE_MAG
        total_mass = self.MASS_CART + self.MASS_POLE
        pole_mass_length = self.MASS_POLE * self.HALF_LENGTH
        cos_theta, sin_theta = math.cos(theta), math.sin(theta)

        temp = (force + pole_mass_length * theta_dot**2 * sin_theta) / total_mass
        theta_acc = (self.GRAVITY * sin_theta - cos_theta * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_theta**2 / total_mass)
        )
        x_acc = temp - pole_mass_length * theta_acc * cos_theta / total_mass

        tau = self.spec.base_timestep
        next_state = np.array(
            [x + tau * x_dot, x_dot + tau * x_acc, theta + tau * theta_dot, theta_dot + tau * theta_acc]
        )
        terminal = bool(abs(next_state[0]) > self.X_THRESHOLD or abs(next_state[2]) > self.THETA_THRESHOLD)
        return next_state, 1.0, terminal


class MountainCarEnv(SimulatedEnvironment):
    """Under-powered car in a valley; -1 per step until the right hilltop is reached."""

    DEFAULT_SPEC: ClassVar[EnvSpec] = EnvSpec(
        name="mountaincar",
        state_dim=2,
        action_set=[[-1.0], [0.0], [1.0]],
        original_timestep=1.0,
        discretization_factor=2,
        original_horizon=128,
        original_discount=0.99,
        reward_description="-1 per step until position >= 0.5",
    )
    MIN_POSITION: ClassVar[float] = -1.2
    MAX_POSITION: ClassVar[float] = 0.6
    MAX_SPEED: ClassVar[float] = 0.07
    GOAL_POSITION: ClassVar[float] = 0.5
    FORCE: ClassVar[float] = 0.001
    GRAVITY: ClassVar[float] = 0.0025

    def __init__(self, spec: EnvSpec | None = None):
        """Initialize the environment.

        Args:
            spec: Environment description; the protocol defaults if None.
        """
        super().__init__(spec or self.DEFAULT_SPEC)

    def _initial_state(self) -> np.ndarray:
        return np.array([self.rng.uniform(-0.6, -0.4), 0.0])

    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        position, velocity = state
        dt = self.spec.base_timestep
        push = self.spec.action_set[action][0]
        velocity += (push * self.FORCE - math.cos(3.0 * position) * self.GRAVITY) * dt
        velocity = float(np.clip(velocity, -self.MAX_SPEED, self.MAX_SPEED))
        position = float(np.clip(position + velocity * dt, self.MIN_POSITION, self.MAX_POSITION))
        if position == self.MIN_POSITION and velocity < 0.0:
            velocity = 0.0
        return np.array([position, velocity]), -1.0, position >= self.GOAL_POSITION


class PendulumEnv(SimulatedEnvironment):
    """Torque-limited pendulum swing-up with semi-implicit Euler; reward is minus a quadratic cost.

    The state is ``(theta, theta_dot)`` with ``theta = 0`` upright, kept in ``[-pi, pi)``.
    """

    DEFAULT_SPEC: ClassVar[EnvSpec] = EnvSpec(
        name="pendulum",
        state_dim=2,
        action_set=[[-2.0], [0.0], [2.0]],
        original_timestep=0.05,
        discretization_factor=1,
        original_horizon=256,
        original_discount=0.99,
        reward_description="-(theta^2 + 0.1 theta_dot^2 + 0.001 u^2)",
    )
    GRAVITY: ClassVar[float] = 10.0
    MASS: ClassVar[float] = 1.0
    LENGTH: ClassVar[float] = 1.0
    MAX_SPEED: ClassVar[float] = 8.0

    def __init__(self, spec: EnvSpec | None = None):
        """Initialize the environment.

        Args:
            spec: Environment description; the protocol defaults if None.
        """
        super().__init__(spec or self.DEFAULT_SPEC)

    def _initial_state(self) -> np.ndarray:
        return np.array([self.rng.uniform(-math.pi, math.pi), self.rng.uniform(-1.0, 1.0)])

    def energy(self, state: np.ndarray) -> float:
        """Mechanical energy of a uniform rod pivoting at one end."""
        theta, theta_dot = state
        inertia_term = self.MASS * self.LENGTH**2 / 6.0 * theta_dot**2
        return float(inertia_term + self.MASS * self.GRAVITY * self.LENGTH / 2.0 * math.cos(theta))

    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        theta, theta_dot = state
        torque = self.spec.action_set[action][0]
        dt = self.spec.base_timestep
        cost = wrap_angle(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * torque**2
        theta_acc = 3.0 * self.GRAVITY / (2.0 * self.LENGTH) * math.sin(theta) + 3.0 / (
            self.MASS * self.LENGTH**2
        ) * torque
        theta_dot = float(np.clip(theta_dot + theta_acc * dt, -self.MAX_SPEED, self.MAX_SPEED))
        theta = wrap_angle(theta + theta_dot * dt)
        return np.array([theta, theta_dot]), -cost, False


class AcrobotEnv(SimulatedEnvironment):
    """Two-link underactuated swing-up integrated with one Runge-Kutta 4 step per base timestep.

    The state is ``(theta1, theta2, theta1_dot, theta2_dot)`` with wrapped angles;
    reward is -1 per step until the tip rises one link length above the pivot.
    """

    DEFAULT_SPEC: ClassVar[EnvSpec] = EnvSpec(
        name="acrobot",
        state_dim=4,
        action_set=[[-1.0], [0.0], [1.0]],
        original_timestep=0.2,
        discretization_factor=4,
        original_horizon=128,
        original_discount=0.99,
        reward_description="-1 per step until -cos(theta1) - cos(theta1 + theta2) > 1",
    )
    LINK_LENGTH: ClassVar[float] = 1.0
    LINK_MASS: ClassVar[float] = 1.0
    LINK_COM: ClassVar[float] = 0.5
    LINK_MOI: ClassVar[float] = 1.0
    GRAVITY: ClassVar[float] = 9.8
    MAX_VEL_1: ClassVar[float] = 4 * math.pi
    MAX_VEL_2: ClassVar[float] = 9 * math.pi

    def __init__(self, spec: EnvSpec | None = None):
        """Initialize the environment.

        Args:
            spec: Environment description; the protocol defaults if None.
        """
        super().__init__(spec or self.DEFAULT_SPEC)

    def _initial_state(self) -> np.ndarray:
        return self.rng.uniform(-0.1, 0.1, size=4)

    def _derivatives(self, state: np.ndarray, torque: float) -> np.ndarray:
        m, l1, lc, inertia, g = self.LINK_MASS, self.LINK_LENGTH, self.LINK_COM, self.LINK_MOI, self.GRAVITY
        theta1, theta2, dtheta1, dtheta2 = state
        d1 = m * lc**2 + m * (l1**2 + lc**2 + 2 * l1 * lc * math.cos(theta2)) + 2 * inertia
        d2 = m * (lc**2 + l1 * lc * math.cos(theta2)) + inertia
        phi2 = m * lc * g * math.cos(theta1 + theta2 - math.pi / 2.0)
        phi1 = (
            -m * l1 * lc * dtheta2**2 * math.sin(theta2)
            - 2 * m * l1 * lc * dtheta2 * dtheta1 * math.sin(theta2)
            + (m * lc + m * l1) * g * math.cos(theta1 - math.pi / 2.0)
            + phi2
        )
        ddtheta2 = (torque + d2 / d1 * phi1 - m * l1 * lc * dtheta1**2 * math.sin(theta2) - phi2) / (
            m * lc**2 + inertia - d2**2 / d1
        )
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2])

    def _transition(self, state: np.ndarray, action: int) -> tuple[np.ndarray, float, bool]:
        torque = self.spec.action_set[action][0]
        dt = self.spec.base_timestep
        k1 = self._derivatives(state, torque)
        k2 = self._derivatives(state + dt / 2.0 * k1, torque)
        k3 = self._derivatives(state + dt / 2.0 * k2, torque)
        k4 = self._derivatives(state + dt * k3, torque)
        next_state = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        next_state[0] = wrap_angle(next_state[0])
        next_state[1] = wrap_angle(next_state[1])
        next_state[2] = np.clip(next_state[2], -self.MAX_VEL_1, self.MAX_VEL_1)
        next_state[3] = np.clip(next_state[3], -self.MAX_VEL_2, self.MAX_VEL_2)
        terminal = bool(-math.cos(next_state[0]) - math.cos(next_state[1] + next_state[0]) > 1.0)
        return next_state, 0.0 if terminal else -1.0, terminal
