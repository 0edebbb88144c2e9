"""Reading and writing datasets, runs, models and tables under an output directory."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pandas as pd
from loguru import logger
from pydantic import BaseModel, ValidationError

from action_persistence.models.dataset import Dataset, DatasetManifest, Trajectory, Transition
from action_persistence.models.pfqi import IterationStats, PfqiConfig
from action_persistence.pfqi.algorithm import PersistenceRun
from action_persistence.regress.qfunction import QFunction, load_q_function
from action_persistence.utils.constants import Constants
from action_persistence.utils.exceptions import DatasetError


class RunPaths:
    """File layout of an experiment output directory."""

    def __init__(self, output_dir: str | Path):
        """Initialize the layout.

        Args:
            output_dir: Root of the experiment outputs.
        """
        self.root = Path(output_dir)

    def seed_dir(self, seed_index: int) -> Path:
        """Directory of one seed (dataset, selection)."""
        return self.root / f"seed_{seed_index}"

    def run_dir(self, seed_index: int, k: int) -> Path:
        """Directory of one PFQI run."""
        return self.seed_dir(seed_index) / f"k_{k}"

    def file(self, name: str) -> Path:
        """Top-level file."""
        return self.root / name


def write_json(path: Path, document: BaseModel | dict[str, Any] | list[Any]) -> Path:
    """Write a pydantic model or a plain document as indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(document, BaseModel):
        text = document.model_dump_json(indent=2)
    else:
        text = json.dumps(document, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    """Read a JSON document."""
    return json.loads(path.read_text(encoding="utf-8"))


def write_frame(path: Path, frame: pd.DataFrame) -> Path:
    """Write a table as CSV with 17 significant digits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=Constants.CSV_FLOAT_FORMAT)
    return path


def _state_columns(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}_{i}" for i in range(dim)]


def dataset_to_frame(dataset: Dataset) -> pd.DataFrame:
    """Flatten a dataset to ``traj_id,t,state_*,action,reward,next_state_*,terminal`` rows."""
    arrays = dataset.arrays
    dim = dataset.manifest.state_dim
    frame = pd.DataFrame({"traj_id": arrays.trajectory_ids, "t": arrays.steps})
    for i, column in enumerate(_state_columns("state", dim)):
        frame[column] = arrays.states[:, i]
    frame["action"] = arrays.actions
    frame["reward"] = arrays.rewards
    for i, column in enumerate(_state_columns("next_state", dim)):
        frame[column] = arrays.next_states[:, i]
    frame["terminal"] = arrays.terminals.astype(int)
    return frame


def write_dataset(dataset: Dataset, directory: Path) -> Path:
    """Write ``dataset.csv`` and its ``manifest.json`` sidecar into ``directory``."""
    write_frame(directory / Constants.DATASET_FILE_NAME, dataset_to_frame(dataset))
    write_json(directory / Constants.MANIFEST_FILE_NAME, dataset.manifest)
    logger.info(f"Dataset with {dataset.n_samples} samples written to {directory}")
    return directory


def read_dataset(directory: Path) -> Dataset:
    """Read a dataset written by ``write_dataset``.

    Raises:
        DatasetError: If a file is missing or malformed.
    """
    try:
        manifest = DatasetManifest.model_validate(read_json(directory / Constants.MANIFEST_FILE_NAME))
        frame = pd.read_csv(directory / Constants.DATASET_FILE_NAME)
        state_columns = _state_columns("state", manifest.state_dim)
        next_columns = _state_columns("next_state", manifest.state_dim)
        states = frame[state_columns].to_numpy(dtype=float)
        next_states = frame[next_columns].to_numpy(dtype=float)
        trajectories = []
        for _, rows in frame.groupby("traj_id", sort=True):
            rows = rows.sort_values("t")
            transitions = tuple(
                Transition(
                    state=states[i],
                    action=int(frame.at[i, "action"]),
                    next_state=next_states[i],
                    reward=float(frame.at[i, "reward"]),
                    terminal=bool(frame.at[i, "terminal"]),
                )
                for i in rows.index
            )
            trajectories.append(Trajectory(transitions=transitions))
        return Dataset(trajectories=tuple(trajectories), manifest=manifest)
    except (OSError, KeyError, ValueError, ValidationError) as e:
        logger.error(f"Cannot read dataset from {directory}: {e}")
        raise DatasetError(f"cannot read dataset from {directory}: {e}") from e


def save_q_function(q: QFunction, path: Path) -> Path:
    """Serialize a Q-function to JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(q.to_dict()), encoding="utf-8")
    return path


def load_q(path: Path) -> QFunction:
    """Load a Q-function written by ``save_q_function``."""
    return load_q_function(read_json(path))


class RunFiles:
    """Files of one run directory."""

    CONFIG = "config.json"
    METRICS = "metrics.csv"
    CURVES = "curves.csv"
    MODEL = "model.json"
    CONTINUATION = "continuation.json"
    TIMING = "timing.json"


def write_run(run: PersistenceRun, directory: Path, config_hash: str) -> Path:
    """Write a run: configuration, metrics, final model and continuation."""
    write_json(
        directory / RunFiles.CONFIG,
        {
            "pfqi": run.config.model_dump(mode="json"),
            "discount": run.discount,
            "op_count": run.op_count,
            "dataset_fingerprint": run.dataset_fingerprint,
            "config_hash": config_hash,
        },
    )
    write_frame(directory / RunFiles.METRICS, run.metrics_frame())
    write_json(
        directory / RunFiles.TIMING,
        {"phase1_seconds": run.phase1_seconds, "fit_seconds": run.fit_seconds},
    )
    save_q_function(run.final_q, directory / RunFiles.MODEL)
    if run.continuation_q is not None:
        save_q_function(run.continuation_q, directory / RunFiles.CONTINUATION)
    return directory


def read_run(directory: Path) -> PersistenceRun:
    """Rebuild a run (without snapshots) from its directory.

    Raises:
        DatasetError: If a required file is missing or malformed.
    """
    try:
        document = read_json(directory / RunFiles.CONFIG)
        timing = read_json(directory / RunFiles.TIMING)
        metrics = pd.read_csv(directory / RunFiles.METRICS)
        stats = [
            IterationStats(iteration=int(row["iter"]), **{key: row[key] for key in metrics.columns if key != "iter"})
            for row in metrics.to_dict(orient="records")
        ]
        continuation_path = directory / RunFiles.CONTINUATION
        return PersistenceRun(
            config=PfqiConfig.model_validate(document["pfqi"]),
            discount=float(document["discount"]),
            final_q=load_q(directory / RunFiles.MODEL),
            continuation_q=load_q(continuation_path) if continuation_path.exists() else None,
            stats=stats,
            op_count=int(document["op_count"]),
            phase1_seconds=float(timing["phase1_seconds"]),
            fit_seconds=float(timing["fit_seconds"]),
            dataset_fingerprint=str(document["dataset_fingerprint"]),
        )
    except (OSError, KeyError, ValueError, ValidationError) as e:
        logger.error(f"Cannot read run from {directory}: {e}")
        raise DatasetError(f"cannot read run from {directory}: {e}") from e

