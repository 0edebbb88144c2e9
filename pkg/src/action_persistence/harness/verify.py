"""Self-checking suites over seeded random instances.

Each suite draws its instances from seeds derived from ``(seed, suite, i)`` and
records the parameters of every failing instance, so a failure can be replayed.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import Any, ClassVar

import numpy as np
from loguru import logger

from action_persistence.dp.bound import persistence_loss_bound
from action_persistence.dp.counterexample import CounterexampleStates, counterexample_mdp
from action_persistence.dp.operators import apply_expectation, apply_k_persistent, apply_optimal, apply_persistent
from action_persistence.dp.solvers import solve_q, solve_q_persistent
from action_persistence.envs.tabular import TabularEnv
from action_persistence.mdp.persistence import persistent_rollout, wrap_persistent_env
from action_persistence.mdp.policy import TabularPolicy
from action_persistence.mdp.random import (
    random_state_action_distribution,
    random_stochastic_policy,
    random_tabular_mdp,
)
from action_persistence.models.dataset import Dataset, DatasetManifest, Trajectory, Transition
from action_persistence.models.mdp import TabularMdp
from action_persistence.models.pfqi import PfqiConfig
from action_persistence.models.regression import RegressorConfig
from action_persistence.models.reports import CheckFailure, SuiteResult, VerifyReport
from action_persistence.pfqi.algorithm import run_pfqi
from action_persistence.pfqi.targets import predicted_op_count
from action_persistence.regress.qfunction import TabularQ
from action_persistence.utils.exceptions import ConfigError
from action_persistence.utils.seeding import derive_seed


class SuiteTolerances:
    """Tolerances of the verification suites."""

    CONTRACTION: ClassVar[float] = 1e-12
    DUALITY: ClassVar[float] = 1e-8
    COUNTEREXAMPLE: ClassVar[float] = 1e-9
    CONSTANT_POLICY: ClassVar[float] = 1e-8


def _max_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b), initial=0.0))


def _random_instance(rng: np.random.Generator, max_states: int, max_discount: float) -> TabularMdp:
    n_states = int(rng.integers(2, max_states + 1))
    n_actions = int(rng.integers(1, 5))
    gamma = float(rng.uniform(0.5, max_discount))
    return random_tabular_mdp(rng, n_states, n_actions, gamma)


class _Suite:
    """Accumulates checks and failures of one suite."""

    def __init__(self, name: str, seed: int):
        self.name = name
        self.seed = seed
        self.n_checks = 0
        self.failures: list[CheckFailure] = []

    def check(self, condition: bool, check: str, **detail: Any) -> None:
        self.n_checks += 1
        if not condition:
            logger.warning(f"verify {self.name}: {check} failed with {detail}")
            self.failures.append(CheckFailure(check=check, detail=detail))

    def result(self) -> SuiteResult:
        return SuiteResult(name=self.name, seed=self.seed, n_checks=self.n_checks, failures=self.failures)


def _contraction_operators(
    mdp: TabularMdp, policy: TabularPolicy
) -> dict[str, tuple[Callable[[TabularQ], TabularQ], float]]:
    gamma = mdp.discount
    operators: dict[str, tuple[Callable[[TabularQ], TabularQ], float]] = {
        "expectation": (lambda q: apply_expectation(mdp, policy, q), gamma),
        "optimal": (lambda q: apply_optimal(mdp, q), gamma),
        "persistent": (lambda q: apply_persistent(mdp, q), gamma),
    }
    for k in (2, 3, 5):
        operators[f"optimal_k{k}"] = (lambda q, k=k: apply_k_persistent(mdp, q, k), gamma**k)
        operators[f"expectation_k{k}"] = (lambda q, k=k: apply_k_persistent(mdp, q, k, policy), gamma**k)
    return operators


def verify_contraction(seed: int, n_pairs: int = 100) -> SuiteResult:
    """Sup-norm contraction of T^pi, T* and T^delta (modulus gamma) and of k-persistent compositions (gamma^k)."""
    suite = _Suite("contraction", seed)
    for i in range(n_pairs):
        instance_seed = derive_seed(seed, "contraction", i)
        rng = np.random.default_rng(instance_seed)
        mdp = _random_instance(rng, 8, 0.99)
        policy = random_stochastic_policy(rng, mdp.n_states, mdp.n_actions)
        shape = (mdp.n_states, mdp.n_actions)
        q1 = TabularQ(rng.normal(scale=10.0, size=shape))
        q2 = TabularQ(rng.normal(scale=10.0, size=shape))
        distance = _max_abs(q1.table, q2.table)
        for name, (operator, modulus) in _contraction_operators(mdp, policy).items():
            image_distance = _max_abs(operator(q1).table, operator(q2).table)
            suite.check(
                image_distance <= modulus * distance + SuiteTolerances.CONTRACTION * (1.0 + distance),
                name,
                instance_seed=instance_seed,
                distance=distance,
                image_distance=image_distance,
                modulus=modulus,
            )
    return suite.result()


def _check_sample_paths(suite: _Suite, mdp: TabularMdp, k: int, instance_seed: int) -> None:
    """Running at persistence k in M matches running normally in the persistent environment."""
    policy = random_stochastic_policy(np.random.default_rng(instance_seed), mdp.n_states, mdp.n_actions)
    horizon = 6
    base = persistent_rollout(TabularEnv(mdp, horizon=horizon * k), policy, k, horizon * k, instance_seed)
    wrapped_env = wrap_persistent_env(TabularEnv(mdp, horizon=horizon), k)
    wrapped = persistent_rollout(wrapped_env, policy, 1, horizon, instance_seed)
    decision_states = [transition.state for transition in base.transitions[::k]]
    aggregated = [
        sum(mdp.discount**i * transition.reward for i, transition in enumerate(base.transitions[t : t + k]))
        for t in range(0, len(base), k)
    ]
    suite.check(
        decision_states == [transition.state for transition in wrapped.transitions]
        and np.allclose(aggregated, [transition.reward for transition in wrapped.transitions], rtol=0.0, atol=1e-12),
        "sample_path",
        instance_seed=instance_seed,
        k=k,
    )


def verify_duality(seed: int, n_instances: int = 20) -> SuiteResult:
    """Composition-based and explicit M_k fixed points agree, and Q*_k <= Q*."""
    suite = _Suite("duality", seed)
    for i in range(n_instances):
        instance_seed = derive_seed(seed, "duality", i)
        rng = np.random.default_rng(instance_seed)
        mdp = _random_instance(rng, 10, 0.95)
        policy = random_stochastic_policy(rng, mdp.n_states, mdp.n_actions)
        q_star = solve_q(mdp)
        for k in range(1, 6):
            detail = {"instance_seed": instance_seed, "k": k, "n_states": mdp.n_states, "n_actions": mdp.n_actions}
            composed = solve_q_persistent(mdp, k, method="composition")
            explicit = solve_q_persistent(mdp, k, method="explicit")
            gap = _max_abs(composed.table, explicit.table)
            suite.check(gap <= SuiteTolerances.DUALITY, "optimal_fixed_point", gap=gap, **detail)

            composed_pi = solve_q_persistent(mdp, k, "expectation", policy, method="composition")
            explicit_pi = solve_q_persistent(mdp, k, "expectation", policy, method="explicit")
            gap_pi = _max_abs(composed_pi.table, explicit_pi.table)
            suite.check(gap_pi <= SuiteTolerances.DUALITY, "expectation_fixed_point", gap=gap_pi, **detail)

            excess = float(np.max(composed.table - q_star.table))
            suite.check(excess <= SuiteTolerances.DUALITY, "persistent_dominated", excess=excess, **detail)
            if k > 1:
                _check_sample_paths(suite, mdp, k, instance_seed)
    return suite.result()


def verify_bound(seed: int, n_instances: int = 50) -> SuiteResult:
    """The persistence performance-loss bound holds, and is tight at zero for constant-action policies."""
    suite = _Suite("bound", seed)
    for i in range(n_instances):
        instance_seed = derive_seed(seed, "bound", i)
        rng = np.random.default_rng(instance_seed)
        n_states, n_actions = int(rng.integers(2, 9)), int(rng.integers(2, 5))
        mdp = random_tabular_mdp(rng, n_states, n_actions, float(rng.uniform(0.5, 0.95)))
        policy = random_stochastic_policy(rng, n_states, n_actions)
        rho = random_state_action_distribution(rng, n_states, n_actions)

        action = int(rng.integers(n_actions))
        constant = TabularPolicy.deterministic(np.full(n_states, action), n_actions)
        constant_rho = np.zeros((n_states, n_actions))
        constant_rho[:, action] = rng.dirichlet(np.ones(n_states))
        for k in (2, 3, 4):
            for p in (1.0, 2.0):
                detail = {"instance_seed": instance_seed, "k": k, "p": p}
                report = persistence_loss_bound(mdp, policy, k, p, rho)
                suite.check(report.holds, "bound_holds", lhs=report.lhs, rhs=report.rhs, **detail)

                report = persistence_loss_bound(mdp, constant, k, p, constant_rho)
                suite.check(
                    report.lhs <= SuiteTolerances.CONSTANT_POLICY and report.rhs <= SuiteTolerances.CONSTANT_POLICY,
                    "constant_policy_zero",
                    lhs=report.lhs,
                    rhs=report.rhs,
                    action=action,
                    **detail,
                )
    return suite.result()


def verify_counterexample(seed: int) -> SuiteResult:
    """The performance loss of persistence on the counterexample MDP equals ``2 gamma R / (1 - gamma)``."""
    suite = _Suite("counterexample", seed)
    start = CounterexampleStates.START
    for reward in (0.5, 1.0, 2.0):
        for gamma in (0.5, 0.9, 0.99):
            mdp = counterexample_mdp(reward, gamma)
            v_star = float(solve_q(mdp).table[start].max())
            expected = gamma * reward / (1.0 - gamma)
            suite.check(
                abs(v_star - expected) <= SuiteTolerances.COUNTEREXAMPLE,
                "optimal_value",
                R=reward,
                gamma=gamma,
                value=v_star,
                expected=expected,
            )
            for k in range(2, 7):
                v_star_k = float(solve_q_persistent(mdp, k).table[start].max())
                gap = v_star - v_star_k
                suite.check(
                    abs(gap - 2.0 * expected) <= SuiteTolerances.COUNTEREXAMPLE,
                    "gap_equality",
                    R=reward,
                    gamma=gamma,
                    k=k,
                    gap=gap,
                    expected=2.0 * expected,
                )
    return suite.result()


def _synthetic_dataset(rng: np.random.Generator, n_samples: int, n_actions: int) -> Dataset:
    states = rng.normal(size=n_samples + 1)
    actions = rng.integers(n_actions, size=n_samples)
    actions[:n_actions] = np.arange(n_actions)
    rewards = rng.uniform(-1.0, 1.0, size=n_samples)
    transitions = tuple(
        Transition(state=states[t], action=int(actions[t]), next_state=states[t + 1], reward=float(rewards[t]))
        for t in range(n_samples)
    )
    manifest = DatasetManifest(
        env_name="synthetic",
        n_samples=n_samples,
        discount=0.9,
        action_set=[[float(a)] for a in range(n_actions)],
        state_dim=1,
    )
    return Dataset(trajectories=(Trajectory(transitions=transitions),), manifest=manifest)


def verify_opcount(seed: int) -> SuiteResult:
    """Instrumented target-phase Q evaluations equal ``(J/k) n |A| + (J (k-1)/k) n``."""
    suite = _Suite("opcount", seed)
    grid = [(512, 400, 2, k) for k in (1, 2, 4, 8)] + [(12, 30, 3, k) for k in (1, 2, 3, 4, 6, 12)]
    datasets: dict[tuple[int, int], Dataset] = {}
    for iterations, n_samples, n_actions, k in grid:
        key = (n_samples, n_actions)
        if key not in datasets:
            datasets[key] = _synthetic_dataset(np.random.default_rng(derive_seed(seed, "opcount", *key)), *key)
        config = PfqiConfig(
            persistence=k,
            iterations=iterations,
            regressor=RegressorConfig(kind="table"),
            snapshot_every=0,
            seed=seed,
        )
        run = run_pfqi(datasets[key], config)
        expected = predicted_op_count(iterations, n_samples, n_actions, k)
        suite.check(
            run.op_count == expected,
            "op_count",
            J=iterations,
            n=n_samples,
            n_actions=n_actions,
            k=k,
            counted=run.op_count,
            expected=expected,
        )
    return suite.result()


SUITES: dict[str, Callable[[int], SuiteResult]] = {
    "contraction": verify_contraction,
    "duality": verify_duality,
    "bound": verify_bound,
    "counterexample": verify_counterexample,
    "opcount": verify_opcount,
}


def run_verification(suites: list[str] | None = None, seed: int = 0) -> VerifyReport:
    """Run the named suites (all of them if None).

    Raises:
        ConfigError: If a suite name is unknown.
    """
    names = list(SUITES) if not suites else suites
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ConfigError(f"unknown verification suites {unknown}; expected some of {list(SUITES)}")
    results = []
    for name in names:
        result = SUITES[name](seed)
        logger.info(f"verify {name}: {result.n_checks} checks, {len(result.failures)} failures")
        results.append(result)
    return VerifyReport(suites=results)
