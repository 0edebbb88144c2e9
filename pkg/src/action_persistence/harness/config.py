"""Experiment configuration documents with flat dotted keys."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import ValidationError

from action_persistence.envs.factory import protocol_defaults
from action_persistence.models.config import ExperimentConfig
from action_persistence.utils.exceptions import ConfigError


def unflatten(flat: dict[str, Any]) -> dict[str, Any]:
    """Turn ``{"env.name": "cartpole"}`` into ``{"env": {"name": "cartpole"}}``.

    Nested objects are accepted too and merged with the dotted keys.

    Raises:
        ConfigError: If a key is both a value and a section.
    """
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        *sections, leaf = key.split(".")
        node = nested
        for section in sections:
            child = node.setdefault(section, {})
            if not isinstance(child, dict):
                raise ConfigError(f"config key {key!r} conflicts with the value of {section!r}")
            node = child
        if isinstance(value, dict):
            section_value = value if leaf in {"overrides", "params"} else unflatten(value)
            existing = node.get(leaf)
            node[leaf] = {**existing, **section_value} if isinstance(existing, dict) else section_value
        else:
            node[leaf] = value
    return nested


def flatten(document: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """Inverse of ``unflatten``; environment overrides and params stay nested objects."""
    flat: dict[str, Any] = {}
    for key, value in document.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict) and value and key not in {"overrides", "params"}:
            flat.update(flatten(value, f"{path}."))
        else:
            flat[path] = value
    return flat


def parse_override(assignment: str) -> tuple[str, Any]:
    """Parse a ``key=value`` override; the value is JSON, or a plain string if it is not.

    Raises:
        ConfigError: If there is no ``=``.
    """
    key, separator, raw = assignment.partition("=")
    if not separator or not key.strip():
        raise ConfigError(f"override {assignment!r} must look like key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Load and validate an experiment configuration.

    Args:
        path: JSON document with flat dotted keys; defaults only if None.
        overrides: ``key=value`` assignments applied on top of the document.

    Returns:
        The validated configuration. ``pfqi.iterations`` defaults to the environment protocol.

    Raises:
        ConfigError: If the document cannot be read or fails validation.
    """
    flat: dict[str, Any] = {}
    if path is not None:
        try:
            flat = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Cannot read config {path}: {e}")
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(flat, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    for assignment in overrides or []:
        key, value = parse_override(assignment)
        flat[key] = value

    document = unflatten(flat)
    env_name = document.get("env", {}).get("name", "cartpole")
    document.setdefault("pfqi", {}).setdefault("iterations", protocol_defaults(env_name).iterations)
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        logger.error(f"Invalid experiment configuration: {e}")
        raise ConfigError(f"invalid experiment configuration: {e}") from e


def resolved_document(config: ExperimentConfig) -> dict[str, Any]:
    """Flat resolved configuration plus its hash, as written to every output directory."""
    return {"config": flatten(config.model_dump(mode="json")), "config_hash": config.config_hash()}
