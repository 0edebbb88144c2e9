from __future__ import annotations


class ActionPersistenceError(Exception):
    """Base exception for every error raised by the package."""

    def __init__(self, message: str) -> None:
        """Initialize the error.

        Args:
            message: The message to display.
        """
        self.message = message
        super().__init__(self.message)


class InvalidMdpError(ActionPersistenceError):
    """Exception raised when a tabular MDP violates its invariants."""


class PersistenceError(ActionPersistenceError):
    """Exception raised for invalid persistence arguments (k < 1, J mod k != 0)."""


class EnvironmentConfigError(ActionPersistenceError):
    """Exception raised when an environment cannot be built from the given name or overrides."""


class EpisodeTerminatedError(ActionPersistenceError):
    """Exception raised when an environment is stepped after a terminal transition."""


class RegressionError(ActionPersistenceError):
    """Exception raised when fitting or querying a regressor fails."""


class DatasetError(ActionPersistenceError):
    """Exception raised when a dataset is malformed or cannot be read."""


class SelectionError(ActionPersistenceError):
    """Exception raised when persistence selection inputs are inconsistent."""


class ConfigError(ActionPersistenceError):
    """Exception raised when an experiment configuration is invalid."""


class PolicyError(ActionPersistenceError):
    """Exception raised when a policy table or behavior policy is invalid."""
