"""Configuration management for AC primal-dual solvers."""

import copy
import json
import math
import yaml
from pathlib import Path
from typing import Dict, Any

from .errors import ConfigError

BETA_MAX = 1.0 - math.sqrt(6.0) / 3.0
RUN_SCHEMA_VERSION = 1

REQUIRED_SECTIONS = [
    "scheduler",
    "stop",
    "trace",
    "storage",
    "guess_check",
    "logging",
    "performance",
]


def load_config(config_path: str = "config/default.yaml") -> Dict[str, Any]:
    """
    Load application defaults from a YAML file.

    Args:
        config_path: Path to configuration file

    Returns:
        Configuration dictionary

    Raises:
        FileNotFoundError: If configuration file not found
        ConfigError: If a required section is missing
        yaml.YAMLError: If configuration file is invalid
    """
    config_file = Path(config_path)

    if not config_file.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        with open(config_file, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise yaml.YAMLError(f"Invalid YAML in configuration file: {e}")

    for section in REQUIRED_SECTIONS:
        if section not in config:
            raise ConfigError(f"Missing required configuration section: {section}")

    return config


def load_run_config(path: str) -> Dict[str, Any]:
    """
    Load a JSON run configuration and check its schema version.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the JSON is malformed or the schema version unknown
    """
    run_file = Path(path)
    if not run_file.exists():
        raise FileNotFoundError(f"Run configuration not found: {path}")

    try:
        with open(run_file, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in run configuration: {e}")

    if not isinstance(document, dict):
        raise ConfigError("Run configuration must be a JSON object")
    version = document.get("schema_version")
    if version != RUN_SCHEMA_VERSION:
        raise ConfigError(
            f"Unsupported schema_version: {version} (expected {RUN_SCHEMA_VERSION})"
        )
    return document


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deep-merge ``override`` onto a copy of ``base``.

    Nested dictionaries merge key by key; any other value replaces.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate_config(config: Dict[str, Any]) -> bool:
    """
    Validate solver configuration parameters.

    Args:
        config: Merged configuration dictionary

    Returns:
        True if valid

    Raises:
        ConfigError: If a parameter is out of range
    """
    scheduler = config.get("scheduler", {})

    alpha = scheduler.get("alpha", 0.5)
    _check(
        isinstance(alpha, (int, float)) and 0.0 < alpha <= 1.0,
        f"alpha out of range: {alpha} (must be in (0, 1])",
    )

    beta = scheduler.get("beta")
    if beta is not None:
        _check(
            isinstance(beta, (int, float)) and 0.0 < beta <= BETA_MAX,
            f"beta out of range: {beta} (must be in (0, {BETA_MAX:.5f}])",
        )

    mu_d = scheduler.get("mu_d")
    if mu_d is not None:
        _check(
            isinstance(mu_d, (int, float)) and mu_d > 0.0,
            f"mu_d out of range: {mu_d} (must be > 0)",
        )

    zeta = scheduler.get("zeta", 1.0)
    _check(
        isinstance(zeta, (int, float)) and zeta > 0.0,
        f"zeta out of range: {zeta} (must be > 0)",
    )

    eta1 = scheduler.get("eta1")
    if eta1 is not None:
        _check(
            isinstance(eta1, (int, float)) and eta1 > 0.0,
            f"eta1 out of range: {eta1} (must be > 0)",
        )

    max_iters = config.get("stop", {}).get("max_iters", 1)
    _check(
        isinstance(max_iters, int) and max_iters >= 1,
        f"max_iters out of range: {max_iters} (must be >= 1)",
    )

    stride = config.get("trace", {}).get("stride")
    if stride is not None:
        _check(
            isinstance(stride, int) and stride >= 1,
            f"trace stride out of range: {stride} (must be >= 1)",
        )

    gc = config.get("guess_check", {})
    for key in ("D_hat0", "eps1", "eps2"):
        value = gc.get(key)
        if value is not None:
            _check(
                isinstance(value, (int, float)) and value > 0.0,
                f"{key} out of range: {value} (must be > 0)",
            )
    max_outer = gc.get("max_outer", 1)
    _check(
        isinstance(max_outer, int) and max_outer >= 1,
        f"max_outer out of range: {max_outer} (must be >= 1)",
    )

    return True
