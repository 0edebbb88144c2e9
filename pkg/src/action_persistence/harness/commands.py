"""Harness commands: collect, train, evaluate, select, report and explore."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from pydantic import ValidationError

from action_persistence.envs.collect import collect_dataset
from action_persistence.envs.factory import make_env, protocol_defaults
from action_persistence.harness.config import resolved_document
from action_persistence.harness.evaluation import episode_returns, evaluate_policy, evaluate_uniform
from action_persistence.harness.io import (
    RunFiles,
    RunPaths,
    load_q,
    read_dataset,
    read_run,
    write_dataset,
    write_frame,
    write_json,
    write_run,
)
from action_persistence.mdp.policy import DiscretePolicy, GreedyPolicy, UniformPolicy
from action_persistence.models.env import ProtocolDefaults
from action_persistence.models.pfqi import PfqiConfig
from action_persistence.models.reports import EvalEntry, EvalReport, SelectionReport
from action_persistence.pfqi.algorithm import run_pfqi
from action_persistence.select.selection import (
    empirical_bellman_residual,
    estimate_return,
    performance_loss,
    select_persistence,
)
from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import ActionPersistenceError, DatasetError, PersistenceError
from action_persistence.utils.seeding import derive_seed

if TYPE_CHECKING:
    from action_persistence.envs.base import Environment
    from action_persistence.models.config import ExperimentConfig
    from action_persistence.models.dataset import Dataset
    from action_persistence.regress.qfunction import QFunction


class ReportColumns:
    """Column orders of the emitted tables."""

    EVALUATION = ["seed", "k", "k_prime", "policy", "episode", "return", "undiscounted_return"]
    SUMMARY = ["k", "k_prime", "policy", "mean", "std", "undiscounted_mean", "undiscounted_std", "n_seeds"]
    TABLE = ["env", "k", "mean", "std", "n_seeds", "undiscounted_mean", "undiscounted_std"]
    CURVES = ["k", "iter", "j_hat", "residual", "index", "mc_return"]
    SELECTION = ["k", "j_hat", "residual", "index", "chosen"]
    EXPLORE = ["seed", "k", "fqi_return", "uniform_return"]


def build_env(config: ExperimentConfig) -> Environment:
    """Fresh base environment of the experiment."""
    return make_env(config.env.name, config.env.overrides, config.env.params)


def collect_protocol(config: ExperimentConfig) -> ProtocolDefaults:
    """Collection settings: the config values, falling back to the environment protocol."""
    defaults = protocol_defaults(config.env.name)
    collect = config.collect
    if collect.n_trajectories is None and collect.max_samples is None:
        n_trajectories, max_samples = defaults.n_trajectories, defaults.max_samples
    else:
        n_trajectories, max_samples = collect.n_trajectories, collect.max_samples
    return ProtocolDefaults(
        sampling_persistence=collect.sampling_persistence or defaults.sampling_persistence,
        n_trajectories=n_trajectories,
        max_samples=max_samples,
        iterations=config.pfqi.iterations,
    )


def write_experiment_config(config: ExperimentConfig) -> Path:
    """Write the resolved configuration and its hash at the root of the output directory."""
    return write_json(RunPaths(config.output_dir).file(Constants.CONFIG_FILE_NAME), resolved_document(config))


def behavior_policy(config: ExperimentConfig, n_actions: int) -> DiscretePolicy:
    """Collection policy: uniform, or greedy on the Q-function stored at ``collect.behavior_model``.

    Raises:
        DatasetError: If the behavior model cannot be read or has the wrong action count.
    """
    model_path = config.collect.behavior_model
    if config.collect.policy == "uniform" or model_path is None:
        return UniformPolicy(n_actions)
    try:
        q = load_q(Path(model_path))
    except (OSError, KeyError, ValueError, ActionPersistenceError) as e:
        logger.error(f"Cannot load behavior model {model_path}: {e}")
        raise DatasetError(f"cannot load behavior model {model_path}: {e}") from e
    if q.n_actions != n_actions:
        raise DatasetError(f"behavior model has {q.n_actions} actions, the environment has {n_actions}")
    return GreedyPolicy(q)


def cmd_collect(config: ExperimentConfig) -> list[Dataset]:
    """Collect one dataset per seed with the configured behavior policy."""
    write_experiment_config(config)
    paths = RunPaths(config.output_dir)
    protocol = collect_protocol(config)
    datasets = []
    for seed_index in range(config.n_seeds):
        env = build_env(config)
        dataset = collect_dataset(
            env,
            behavior_policy(config, env.spec.n_actions),
            k_sampling=protocol.sampling_persistence,
            n_trajectories=protocol.n_trajectories,
            seed=derive_seed(config.master_seed, "collect", seed_index),
            in_persistent_env=config.collect.in_persistent_env,
            max_samples=protocol.max_samples,
        )
        write_dataset(dataset, paths.seed_dir(seed_index))
        datasets.append(dataset)
    return datasets


class CurveRecorder:
    """PFQI callback emitting ``k,iter,j_hat,residual,index,mc_return`` rows.

    A row for iteration j needs Q^(j+k), so Q^(j) is held only until the run reaches
    j + k. Rows are taken at iterations that are multiples of both k and ``every``.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        dataset: Dataset,
        seed_index: int,
        k: int,
    ):
        """Initialize the recorder.

        Args:
            config: Experiment configuration (curve cadence and episodes).
            dataset: Training dataset.
            seed_index: Seed of the run.
            k: Persistence of the run.
        """
        self.config = config
        self.dataset = dataset
        self.seed_index = seed_index
        self.k = k
        self.every = config.evaluate.curve_every
        self.gamma = dataset.discount
        self.pending: dict[int, QFunction] = {}
        self.rows: list[dict[str, float | int]] = []

    def _is_point(self, iteration: int) -> bool:
        return iteration % self.k == 0 and iteration % self.every == 0 and iteration <= self.config.pfqi.iterations

    def _mc_return(self, iteration: int, q: QFunction) -> float:
        if self.config.evaluate.curve_episodes == 0:
            return float("nan")
        seed = derive_seed(self.config.master_seed, "curve", self.seed_index, self.k, iteration)
        returns, _ = episode_returns(
            build_env(self.config), GreedyPolicy(q), self.k, self.config.evaluate.curve_episodes, seed
        )
        return float(np.mean(returns))

    def __call__(self, iteration: int, q: QFunction) -> None:
        """Receive Q^(iteration)."""
        start = iteration - self.k
        if start in self.pending:
            q_start = self.pending.pop(start)
            j_hat = estimate_return(q_start, self.dataset.initial_states)
            residual = empirical_bellman_residual(q_start, q, self.dataset)
            self.rows.append(
                {
                    "k": self.k,
                    "iter": start,
                    "j_hat": j_hat,
                    "residual": residual,
                    "index": j_hat - residual / (1.0 - self.gamma**self.k),
                    "mc_return": self._mc_return(start, q_start),
                }
            )
        if self.every and self._is_point(iteration):
            self.pending[iteration] = q

    def frame(self) -> pd.DataFrame:
        """Rows recorded so far."""
        return pd.DataFrame(self.rows, columns=ReportColumns.CURVES)


def run_config(config: ExperimentConfig, seed_index: int, k: int) -> PfqiConfig:
    """PFQI configuration of the run ``(seed_index, k)``.

    Raises:
        PersistenceError: If J is not a multiple of k.
    """
    document = config.pfqi.model_dump()
    document.update(
        persistence=k,
        continuation=True,
        snapshot_every=0,
        seed=derive_seed(config.master_seed, "train", seed_index, k),
    )
    try:
        return PfqiConfig.model_validate(document)
    except ValidationError as e:
        logger.error(f"Run k={k} rejected: {e}")
        raise PersistenceError(f"run k={k} rejected: {e}") from e


def train_one(config: ExperimentConfig, seed_index: int, k: int) -> tuple[int, int, float]:
    """Train and write the run ``(seed_index, k)``; returns its Phase-1 wall time."""
    paths = RunPaths(config.output_dir)
    dataset = read_dataset(paths.seed_dir(seed_index))
    recorder = CurveRecorder(config, dataset, seed_index, k)
    run = run_pfqi(dataset, run_config(config, seed_index, k), callback=recorder)
    directory = write_run(run, paths.run_dir(seed_index, k), config.config_hash())
    write_frame(directory / RunFiles.CURVES, recorder.frame())
    return seed_index, k, run.phase1_seconds


def _check_wall_time_trend(timings: list[tuple[int, int, float]]) -> None:
    frame = pd.DataFrame(timings, columns=["seed", "k", "phase1_seconds"])
    means = frame.groupby("k")["phase1_seconds"].mean().sort_index()
    logger.info(f"Mean Phase-1 seconds per k: {means.round(4).to_dict()}")
    if not means.is_monotonic_decreasing:
        logger.warning("Phase-1 wall time is not non-increasing in k on this dataset")


def cmd_train(config: ExperimentConfig) -> list[tuple[int, int, float]]:
    """Train PFQI for every (seed, k) pair in a work pool, collecting datasets first if missing."""
    write_experiment_config(config)
    paths = RunPaths(config.output_dir)
    for k in config.select.candidates:
        run_config(config, 0, k)
    if any(
        not (paths.seed_dir(i) / Constants.DATASET_FILE_NAME).exists() for i in range(config.n_seeds)
    ):
        cmd_collect(config)
    jobs = [(i, k) for i in range(config.n_seeds) for k in config.select.candidates]
    logger.info(f"Training {len(jobs)} runs with n_jobs={config.n_jobs}")
    timings = Parallel(n_jobs=config.n_jobs)(delayed(train_one)(config, i, k) for i, k in jobs)
    _check_wall_time_trend(timings)
    return timings


def evaluate_one(config: ExperimentConfig, seed_index: int, k: int) -> list[EvalEntry]:
    """Evaluate the greedy policy of the run ``(seed_index, k)`` at k and every cross persistence.

    Raises:
        DatasetError: If the run has not been trained.
    """
    model_path = RunPaths(config.output_dir).run_dir(seed_index, k) / RunFiles.MODEL
    if not model_path.exists():
        logger.error(f"Missing run {model_path.parent}")
        raise DatasetError(f"missing run {model_path.parent}; run train first")
    policy = GreedyPolicy(load_q(model_path))
    env = build_env(config)
    return [
        evaluate_policy(
            env,
            policy,
            seed_index,
            k,
            k_prime,
            config.evaluate.n_episodes,
            derive_seed(config.master_seed, "evaluate", seed_index, k, k_prime),
        )
        for k_prime in sorted({k, *config.execution_persistences})
    ]


def _uniform_entries(config: ExperimentConfig) -> list[EvalEntry]:
    env = build_env(config)
    k_primes = sorted({*config.select.candidates, *config.execution_persistences})
    return [
        evaluate_uniform(
            env,
            seed_index,
            k_prime,
            config.evaluate.n_episodes,
            derive_seed(config.master_seed, "uniform", seed_index, k_prime),
        )
        for seed_index in range(config.n_seeds)
        for k_prime in k_primes
    ]


def evaluation_frame(report: EvalReport) -> pd.DataFrame:
    """One row per evaluated episode."""
    rows = [
        {
            "seed": entry.seed,
            "k": entry.k,
            "k_prime": entry.k_prime,
            "policy": entry.policy,
            "episode": episode,
            "return": discounted,
            "undiscounted_return": undiscounted,
        }
        for entry in report.entries
        for episode, (discounted, undiscounted) in enumerate(
            zip(entry.returns, entry.undiscounted_returns, strict=True)
        )
    ]
    return pd.DataFrame(rows, columns=ReportColumns.EVALUATION)


def read_evaluation(path: Path) -> EvalReport:
    """Rebuild an evaluation report from ``evaluation.csv``.

    Raises:
        DatasetError: If the file is missing or malformed.
    """
    try:
        frame = pd.read_csv(path)
        entries = [
            EvalEntry.model_validate(
                {
                    "seed": int(seed),
                    "k": int(k),
                    "k_prime": int(k_prime),
                    "policy": policy,
                    "returns": rows.sort_values("episode")["return"].tolist(),
                    "undiscounted_returns": rows.sort_values("episode")["undiscounted_return"].tolist(),
                }
            )
            for (seed, k, k_prime, policy), rows in frame.groupby(["seed", "k", "k_prime", "policy"], sort=True)
        ]
    except (OSError, KeyError, ValueError, ValidationError) as e:
        logger.error(f"Cannot read evaluation {path}: {e}")
        raise DatasetError(f"cannot read evaluation {path}: {e}") from e
    return EvalReport(entries=entries)


def summary_frames(report: EvalReport, env_name: str) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-cell summary across seeds and the ``env,k,mean,std,n_seeds`` table at k' = k."""
    summary = pd.DataFrame([cell.model_dump() for cell in report.aggregate()], columns=ReportColumns.SUMMARY)
    table = summary[(summary["policy"] == "greedy") & (summary["k"] == summary["k_prime"])].copy()
    table.insert(0, "env", env_name)
    return summary, table[ReportColumns.TABLE].reset_index(drop=True)


def cmd_evaluate(config: ExperimentConfig) -> EvalReport:
    """Monte-Carlo evaluation of every trained run, plus the uniform reference rows."""
    write_experiment_config(config)
    paths = RunPaths(config.output_dir)
    jobs = [(i, k) for i in range(config.n_seeds) for k in config.select.candidates]
    batches = Parallel(n_jobs=config.n_jobs)(delayed(evaluate_one)(config, i, k) for i, k in jobs)
    entries = [entry for batch in batches for entry in batch]
    if config.evaluate.include_uniform:
        entries.extend(_uniform_entries(config))
    report = EvalReport(entries=entries)

    write_frame(paths.file("evaluation.csv"), evaluation_frame(report))
    summary, table = summary_frames(report, config.env.name)
    write_frame(paths.file("evaluation_summary.csv"), summary)
    write_frame(paths.file("table.csv"), table)
    logger.info(f"Evaluated {len(jobs)} runs over {config.n_seeds} seeds")
    return report


def _selection_for_seed(config: ExperimentConfig, seed_index: int, evaluations: EvalReport) -> dict[str, Any]:
    paths = RunPaths(config.output_dir)
    dataset = read_dataset(paths.seed_dir(seed_index))
    runs = {k: read_run(paths.run_dir(seed_index, k)) for k in config.select.candidates}
    report: SelectionReport = select_persistence(runs, dataset)
    loss = performance_loss(evaluations.means(seed_index), report.chosen)
    selection = pd.DataFrame(report.rows(), columns=ReportColumns.SELECTION)
    write_frame(paths.seed_dir(seed_index) / "selection.csv", selection)
    document = {**report.model_dump(mode="json"), "performance_loss": loss, "config_hash": config.config_hash()}
    write_json(paths.seed_dir(seed_index) / "selection.json", document)
    return {"seed": seed_index, "chosen": report.chosen, "performance_loss": loss}


def cmd_select(config: ExperimentConfig) -> dict[str, Any]:
    """Run persistence selection on every seed and summarize the chosen k and performance loss."""
    write_experiment_config(config)
    paths = RunPaths(config.output_dir)
    evaluation_path = paths.file("evaluation.csv")
    evaluations = read_evaluation(evaluation_path) if evaluation_path.exists() else cmd_evaluate(config)
    per_seed = [_selection_for_seed(config, i, evaluations) for i in range(config.n_seeds)]
    losses = np.array([row["performance_loss"] for row in per_seed])
    chosen = [row["chosen"] for row in per_seed]
    summary = {
        "chosen": {str(row["seed"]): row["chosen"] for row in per_seed},
        "chosen_counts": {str(k): chosen.count(k) for k in config.select.candidates},
        "performance_loss": {str(row["seed"]): row["performance_loss"] for row in per_seed},
        "performance_loss_mean": float(losses.mean()),
        "performance_loss_std": float(losses.std(ddof=1)) if losses.size > 1 else 0.0,
        "config_hash": config.config_hash(),
    }
    write_json(paths.file("selection_summary.json"), summary)
    logger.info(f"Selection over {config.n_seeds} seeds: {summary['chosen_counts']}")
    return summary


def cmd_report(config: ExperimentConfig) -> dict[str, pd.DataFrame]:
    """Flatten run directories into ``table.csv`` and the mean ``curves.csv``."""
    paths = RunPaths(config.output_dir)
    report = read_evaluation(paths.file("evaluation.csv"))
    summary, table = summary_frames(report, config.env.name)
    write_frame(paths.file("evaluation_summary.csv"), summary)
    write_frame(paths.file("table.csv"), table)

    curve_files = [
        paths.run_dir(i, k) / RunFiles.CURVES for i in range(config.n_seeds) for k in config.select.candidates
    ]
    frames = [frame for frame in (pd.read_csv(path) for path in curve_files if path.exists()) if not frame.empty]
    if frames:
        curves = pd.concat(frames).groupby(["k", "iter"], as_index=False)[ReportColumns.CURVES[2:]].mean()
    else:
        curves = pd.DataFrame(columns=ReportColumns.CURVES)
    write_frame(paths.file("curves.csv"), curves[ReportColumns.CURVES])
    return {"summary": summary, "table": table, "curves": curves}


def explore_one(config: ExperimentConfig, seed_index: int, k: int) -> dict[str, float | int]:
    """Collect in the k-persistent environment, fit FQI there, and compare against the uniform policy."""
    protocol = collect_protocol(config)
    env = build_env(config)
    dataset = collect_dataset(
        env,
        UniformPolicy(env.spec.n_actions),
        k_sampling=k,
        n_trajectories=protocol.n_trajectories,
        seed=derive_seed(config.master_seed, "explore", seed_index, k),
        in_persistent_env=True,
        max_samples=protocol.max_samples,
    )
    fqi_config = PfqiConfig(
        persistence=1,
        iterations=config.pfqi.iterations,
        regressor=config.pfqi.regressor,
        snapshot_every=0,
        seed=derive_seed(config.master_seed, "explore-train", seed_index, k),
    )
    run = run_pfqi(dataset, fqi_config)
    n_episodes = config.evaluate.n_episodes
    fqi_returns, _ = episode_returns(
        env,
        GreedyPolicy(run.final_q),
        k,
        n_episodes,
        derive_seed(config.master_seed, "explore-evaluate", seed_index, k),
    )
    uniform_returns, _ = episode_returns(
        env,
        UniformPolicy(env.spec.n_actions),
        k,
        n_episodes,
        derive_seed(config.master_seed, "explore-uniform", seed_index, k),
    )
    return {
        "seed": seed_index,
        "k": k,
        "fqi_return": float(np.mean(fqi_returns)),
        "uniform_return": float(np.mean(uniform_returns)),
    }


def cmd_explore(config: ExperimentConfig) -> pd.DataFrame:
    """Exploration study: FQI on data collected in each k-persistent environment."""
    write_experiment_config(config)
    paths = RunPaths(config.output_dir)
    jobs = [(i, k) for i in range(config.n_seeds) for k in config.select.candidates]
    rows = Parallel(n_jobs=config.n_jobs)(delayed(explore_one)(config, i, k) for i, k in jobs)
    frame = pd.DataFrame(rows, columns=ReportColumns.EXPLORE)
    write_frame(paths.file("explore.csv"), frame)
    summary = frame.groupby("k").agg(
        fqi_mean=("fqi_return", "mean"),
        fqi_std=("fqi_return", "std"),
        uniform_mean=("uniform_return", "mean"),
        uniform_std=("uniform_return", "std"),
        n_seeds=("seed", "count"),
    )
    write_frame(paths.file("explore_summary.csv"), summary.reset_index().fillna(0.0))
    return frame
