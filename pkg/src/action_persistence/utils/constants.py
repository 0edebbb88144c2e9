from __future__ import annotations

from typing import ClassVar


class Constants:
    """Constants for the project."""

    PROBABILITY_ATOL: ClassVar[float] = 1e-12
    DISTRIBUTION_ATOL: ClassVar[float] = 1e-10
    DEFAULT_SOLVER_TOL: ClassVar[float] = 1e-10
    MAX_SOLVER_ITERATIONS: ClassVar[int] = 1_000_000
    CSV_FLOAT_FORMAT: ClassVar[str] = "%.17g"
    CONFIG_FILE_NAME: ClassVar[str] = "config.json"
    MANIFEST_FILE_NAME: ClassVar[str] = "manifest.json"
    DATASET_FILE_NAME: ClassVar[str] = "dataset.csv"
