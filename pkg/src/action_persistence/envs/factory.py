from __future__ import annotations

import json
import re
from collections.abc import Callable
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
from loguru import logger
from pydantic import ValidationError

from action_persistence.dp.counterexample import CounterexampleStates, counterexample_mdp
from action_persistence.envs.base import Environment
from action_persistence.envs.classic import AcrobotEnv, CartPoleEnv, MountainCarEnv, PendulumEnv
from action_persistence.envs.tabular import TabularEnv
from action_persistence.models.env import EnvSpec, ProtocolDefaults
from action_persistence.models.mdp import TabularMdp
from action_persistence.utils.exceptions import ActionPersistenceError, EnvironmentConfigError


class EnvironmentRegistry:
    """Named environments and their batch protocols."""

    CLASSIC: ClassVar[dict[str, type[CartPoleEnv | MountainCarEnv | PendulumEnv | AcrobotEnv]]] = {
        "cartpole": CartPoleEnv,
        "mountaincar": MountainCarEnv,
        "pendulum": PendulumEnv,
        "acrobot": AcrobotEnv,
    }
    PROTOCOLS: ClassVar[dict[str, ProtocolDefaults]] = {
        "cartpole": ProtocolDefaults(sampling_persistence=1, max_samples=400, iterations=512),
        "mountaincar": ProtocolDefaults(sampling_persistence=8, n_trajectories=20, iterations=256),
        "pendulum": ProtocolDefaults(sampling_persistence=1, n_trajectories=100, iterations=64),
        "acrobot": ProtocolDefaults(sampling_persistence=4, n_trajectories=200, iterations=512),
    }
    TABULAR_PROTOCOL: ClassVar[ProtocolDefaults] = ProtocolDefaults(n_trajectories=100, iterations=64)
    TABULAR_NAMES: ClassVar[tuple[str, ...]] = ("counterexample", "tabular-file")
    CALL_PATTERN: ClassVar[re.Pattern[str]] = re.compile(r"^\s*([\w-]+)\s*\((.*)\)\s*$")

    @classmethod
    def names(cls) -> list[str]:
        """All environment names accepted by ``make_env``."""
        return [*cls.CLASSIC, *cls.TABULAR_NAMES]


def parse_env_name(name: str) -> tuple[str, list[float]]:
    """Split ``"counterexample(2, 0.9)"`` into its base name and positional arguments.

    Raises:
        EnvironmentConfigError: If an argument is not a number.
    """
    match = EnvironmentRegistry.CALL_PATTERN.match(name)
    if match is None:
        return name.strip(), []
    base, arguments = match.group(1), match.group(2)
    try:
        values = [float(part) for part in arguments.split(",") if part.strip()]
    except ValueError as e:
        raise EnvironmentConfigError(f"invalid arguments in environment name {name!r}") from e
    return base, values


def protocol_defaults(name: str) -> ProtocolDefaults:
    """Batch protocol of a named environment.

    Raises:
        EnvironmentConfigError: If the name is unknown.
    """
    base, _ = parse_env_name(name)
    if base in EnvironmentRegistry.PROTOCOLS:
        return EnvironmentRegistry.PROTOCOLS[base]
    if base in EnvironmentRegistry.TABULAR_NAMES:
        return EnvironmentRegistry.TABULAR_PROTOCOL
    raise EnvironmentConfigError(f"Unknown environment {name!r}; expected one of {EnvironmentRegistry.names()}")


def _apply_overrides(spec: EnvSpec, overrides: dict[str, Any]) -> EnvSpec:
    document = spec.model_dump(exclude={"base_timestep", "horizon", "discount"})
    try:
        return EnvSpec.model_validate({**document, **overrides})
    except ValidationError as e:
        logger.error(f"Invalid overrides for {spec.name}: {overrides}")
        raise EnvironmentConfigError(f"invalid overrides for {spec.name}: {e}") from e


def _make_classic(base: str, overrides: dict[str, Any], params: dict[str, Any]) -> Environment:
    if params:
        raise EnvironmentConfigError(f"{base} takes no builder params, got {sorted(params)}")
    env_class = EnvironmentRegistry.CLASSIC[base]
    return env_class(_apply_overrides(env_class.DEFAULT_SPEC, overrides))


def _tabular_horizon(base: str, overrides: dict[str, Any], params: dict[str, Any]) -> int:
    unknown = set(overrides) - {"original_horizon"}
    if unknown:
        raise EnvironmentConfigError(f"{base} only accepts the original_horizon override, got {sorted(unknown)}")
    return int(overrides.get("original_horizon", params.get("horizon", 100)))


def _make_counterexample(arguments: list[float], overrides: dict[str, Any], params: dict[str, Any]) -> Environment:
    reward = arguments[0] if arguments else float(params.get("R", 1.0))
    gamma = arguments[1] if len(arguments) > 1 else float(params.get("gamma", 0.9))
    mdp = counterexample_mdp(reward, gamma)
    start = np.zeros(mdp.n_states)
    start[CounterexampleStates.START] = 1.0
    return TabularEnv(
        mdp,
        name="counterexample",
        horizon=_tabular_horizon("counterexample", overrides, params),
        initial_distribution=start,
        reward_noise_std=float(params.get("reward_noise_std", 0.0)),
    )


def load_tabular_mdp(path: str | Path) -> TabularMdp:
    """Load a tabular MDP from a JSON document ``{n_states, n_actions, P, r, gamma}``.

    Raises:
        EnvironmentConfigError: If the file is missing or does not describe a valid MDP.
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        return TabularMdp.from_document(document)
    except (OSError, ValueError, KeyError, TypeError) as e:
        logger.error(f"Cannot load tabular MDP from {path}: {e}")
        raise EnvironmentConfigError(f"cannot load tabular MDP from {path}: {e}") from e


def _make_tabular_file(overrides: dict[str, Any], params: dict[str, Any]) -> Environment:
    if "path" not in params:
        raise EnvironmentConfigError("tabular-file needs params.path")
    mdp = load_tabular_mdp(params["path"])
    initial = None
    if "initial_state" in params:
        initial = np.zeros(mdp.n_states)
        initial[int(params["initial_state"])] = 1.0
    return TabularEnv(
        mdp,
        name=Path(params["path"]).stem,
        horizon=_tabular_horizon("tabular-file", overrides, params),
        initial_distribution=initial,
        reward_noise_std=float(params.get("reward_noise_std", 0.0)),
    )


def make_env(name: str, overrides: dict[str, Any] | None = None, params: dict[str, Any] | None = None) -> Environment:
    """Build a named environment.

    Args:
        name: One of ``cartpole``, ``mountaincar``, ``pendulum``, ``acrobot``,
            ``counterexample`` (optionally ``counterexample(R, gamma)``) or ``tabular-file``.
        overrides: Partial EnvSpec, e.g. ``{"discretization_factor": 8}``.
        params: Builder parameters (counterexample ``R``/``gamma``, tabular ``path``,
            ``horizon``, ``initial_state``, ``reward_noise_std``).

    Returns:
        A fresh environment instance.

    Raises:
        EnvironmentConfigError: If the name is unknown or the overrides are invalid.
    """
    overrides = overrides or {}
    params = params or {}
    base, arguments = parse_env_name(name)
    builders: dict[str, Callable[[], Environment]] = {
        "counterexample": lambda: _make_counterexample(arguments, overrides, params),
        "tabular-file": lambda: _make_tabular_file(overrides, params),
    }
    try:
        if base in EnvironmentRegistry.CLASSIC:
            return _make_classic(base, overrides, params)
        if base in builders:
            return builders[base]()
    except EnvironmentConfigError:
        raise
    except ActionPersistenceError as e:
        raise EnvironmentConfigError(e.message) from e
    except ValueError as e:
        raise EnvironmentConfigError(f"cannot build {name!r}: {e}") from e
    logger.error(f"Unknown environment {name!r}")
    raise EnvironmentConfigError(f"Unknown environment {name!r}; expected one of {EnvironmentRegistry.names()}")
