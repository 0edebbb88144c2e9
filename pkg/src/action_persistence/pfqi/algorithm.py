from __future__ import annotations

import time
from collections.abc import Callable
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from action_persistence.mdp.policy import GreedyPolicy
from action_persistence.models.pfqi import IterationStats, PfqiConfig
from action_persistence.pfqi.targets import compute_targets
from action_persistence.regress.base import ConstantRegressor, Regressor
from action_persistence.regress.factory import make_regressor
from action_persistence.regress.qfunction import CountingQFunction, FittedQ, QFunction, ZeroQ
from action_persistence.utils.exceptions import DatasetError, PersistenceError, RegressionError
from action_persistence.utils.seeding import derive_seed

if TYPE_CHECKING:
    from action_persistence.models.dataset import Dataset, TransitionArrays
    from action_persistence.models.regression import RegressorConfig

IterationCallback = Callable[[int, QFunction], None]


class PersistenceRun(BaseModel):
    """Output of one PFQI training at persistence k.

    Attributes:
        config: The run configuration.
        discount: Discount used for the targets.
        final_q: Q^(J).
        continuation_q: Q^(J+k) when the continuation was requested.
        snapshots: ``(j, Q^(j))`` pairs at the snapshot cadence, j <= J.
        stats: Per-iteration target statistics, continuation included.
        op_count: Q evaluations in the target phase of the first J iterations.
        phase1_seconds: Time spent computing targets in the first J iterations.
        fit_seconds: Time spent fitting regressors in the first J iterations.
        dataset_fingerprint: Fingerprint of the training dataset.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    config: PfqiConfig
    discount: float
    final_q: QFunction
    continuation_q: QFunction | None = None
    snapshots: list[tuple[int, QFunction]] = Field(default_factory=list)
    stats: list[IterationStats] = Field(default_factory=list)
    op_count: int = Field(ge=0)
    phase1_seconds: float = Field(ge=0.0)
    fit_seconds: float = Field(ge=0.0)
    dataset_fingerprint: str

    @property
    def persistence(self) -> int:
        """Persistence k of the run."""
        return self.config.persistence

    def metrics_frame(self) -> pd.DataFrame:
        """Per-iteration metrics with columns ``iter,mode,y_mean,y_min,y_max,fit_seconds,eval_count``."""
        columns = ["iter", "mode", "y_mean", "y_min", "y_max", "fit_seconds", "eval_count"]
        rows = [stat.model_dump() for stat in self.stats]
        frame = pd.DataFrame(rows, columns=["iteration", *columns[1:]])
        return frame.rename(columns={"iteration": "iter"})[columns]


def fit_q_function(
    arrays: TransitionArrays,
    targets: np.ndarray,
    n_actions: int,
    config: RegressorConfig,
    seed: int,
) -> FittedQ:
    """Fit one regressor per action on ``(S_i, Y_i)`` restricted to ``A_i = a``.

    Actions absent from the batch get a constant zero predictor.
    """
    models: list[Regressor] = []
    for action in range(n_actions):
        rows = arrays.actions == action
        if not rows.any():
            logger.warning(f"Action {action} never appears in the dataset; predicting 0 for it")
            models.append(ConstantRegressor(0.0))
            continue
        regressor = make_regressor(config, derive_seed(seed, action))
        models.append(regressor.fit(arrays.states[rows], targets[rows]))
    return FittedQ(models, feature_dim=int(arrays.states.shape[1]))


def _target_bound(arrays: TransitionArrays, gamma: float) -> float:
    r_max = float(np.max(np.abs(arrays.rewards)))
    return r_max / (1.0 - gamma) + r_max


def run_pfqi(dataset: Dataset, config: PfqiConfig, callback: IterationCallback | None = None) -> PersistenceRun:
    """Run Persistent Fitted Q-Iteration.

    Iteration j computes targets with the empirical optimal operator when
    ``j mod k == 0`` and with the empirical persistent operator otherwise, then
    refits a fresh regressor per action on them. Q^(0) is identically zero. The
    regressor seed of iteration j depends only on ``(config.seed, j)``.

    Args:
        dataset: Training batch.
        config: Run configuration.
        callback: Called as ``callback(j, Q^(j))`` after every iteration, continuation included.

    Returns:
        The run with final model, optional continuation, snapshots and statistics.

    Raises:
        DatasetError: If the dataset is empty.
        RegressionError: If a target leaves the bound ``r_max / (1 - gamma) + r_max``.
        PersistenceError: If the configuration yields no Q^(J), i.e. J < 1.
    """
    if dataset.n_samples == 0:
        raise DatasetError("cannot run PFQI on an empty dataset")
    k = config.persistence
    gamma = dataset.discount if config.discount is None else config.discount
    arrays = dataset.arrays
    bound = _target_bound(arrays, gamma)
    total = config.iterations + (k if config.continuation else 0)
    progress = _Progress(config)
    q: QFunction = ZeroQ(dataset.n_actions)
    logger.info(f"PFQI k={k}: {total} iterations on {dataset.n_samples} samples (gamma={gamma:.6f})")

    for j in range(total):
        q, stat, target_seconds = _iterate(q, arrays, j, gamma, bound, config)
        progress.record(q, stat, target_seconds)
        if callback is not None:
            callback(j + 1, q)

    if progress.final_q is None:
        raise PersistenceError(f"PFQI needs at least one iteration, got J={config.iterations}")
    logger.info(f"PFQI k={k} finished: {progress.op_count} Q evaluations, phase 1 took {progress.phase1_seconds:.3f}s")
    return PersistenceRun(
        config=config,
        discount=gamma,
        final_q=progress.final_q,
        continuation_q=q if config.continuation else None,
        snapshots=progress.snapshots,
        stats=progress.stats,
        op_count=progress.op_count,
        phase1_seconds=progress.phase1_seconds,
        fit_seconds=progress.fit_seconds,
        dataset_fingerprint=dataset.fingerprint,
    )


def _iterate(
    q: QFunction,
    arrays: TransitionArrays,
    j: int,
    gamma: float,
    bound: float,
    config: PfqiConfig,
) -> tuple[FittedQ, IterationStats, float]:
    """One PFQI iteration: targets from Q^(j), then the regression giving Q^(j+1)."""
    mode = "optimal" if j % config.persistence == 0 else "persistent"
    counter = CountingQFunction(q)
    started = time.perf_counter()
    targets = compute_targets(counter, arrays, mode, gamma)
    target_seconds = time.perf_counter() - started
    if np.max(np.abs(targets)) > bound * (1.0 + 1e-9):
        logger.error(f"PFQI target {np.max(np.abs(targets))} exceeds the bound {bound}")
        raise RegressionError(f"PFQI target exceeds r_max/(1-gamma)+r_max={bound} at iteration {j}")

    started = time.perf_counter()
    fitted = fit_q_function(arrays, targets, counter.n_actions, config.regressor, derive_seed(config.seed, j))
    stat = IterationStats(
        iteration=j,
        mode=mode,
        y_mean=float(targets.mean()),
        y_min=float(targets.min()),
        y_max=float(targets.max()),
        fit_seconds=time.perf_counter() - started,
        eval_count=counter.count,
    )
    logger.debug(f"PFQI k={config.persistence} iter {j} ({mode}): y_mean={stat.y_mean:.4f}, evals={counter.count}")
    return fitted, stat, target_seconds


class _Progress:
    """Phase-1 totals, snapshots and the Q^(J) handle accumulated over the iterations."""

    def __init__(self, config: PfqiConfig):
        self.config = config
        self.final_q: QFunction | None = None
        self.snapshots: list[tuple[int, QFunction]] = []
        self.stats: list[IterationStats] = []
        self.op_count = 0
        self.phase1_seconds = 0.0
        self.fit_seconds = 0.0

    def record(self, q: QFunction, stat: IterationStats, target_seconds: float) -> None:
        """Add iteration ``stat.iteration`` and its fitted Q^(j+1)."""
        done = stat.iteration + 1
        self.stats.append(stat)
        if done > self.config.iterations:
            return
        self.op_count += stat.eval_count
        self.phase1_seconds += target_seconds
        self.fit_seconds += stat.fit_seconds
        if done == self.config.iterations:
            self.final_q = q
        cadence = self.config.snapshot_cadence
        if cadence and done % cadence == 0:
            self.snapshots.append((done, q))


def greedy_policy(q: QFunction) -> GreedyPolicy:
    """Greedy policy of ``q``; ties go to the lowest action index."""
    return GreedyPolicy(q)
