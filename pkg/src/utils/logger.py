"""Logging setup for AC primal-dual solvers."""

import logging
import logging.config
import yaml
from pathlib import Path
from typing import Dict, Any


def setup_logging(
    config: Dict[str, Any], logging_config_path: str = "config/logging.yaml"
) -> None:
    """
    Setup logging configuration.

    Args:
        config: Application configuration dictionary
        logging_config_path: dictConfig YAML file, used when present
    """
    log_dir = Path("logs")
    log_dir.mkdir(exist_ok=True)

    config_file = Path(logging_config_path)
    if config_file.exists():
        try:
            with open(config_file, "r", encoding="utf-8") as f:
                logging_config = yaml.safe_load(f)
            logging.config.dictConfig(logging_config)
            return
        except Exception as e:
            print(f"Warning: Could not load logging config from file: {e}")

    # Fallback to basic configuration from main config
    log_level = getattr(logging, config.get("logging", {}).get("level", "INFO").upper())
    log_format = config.get("logging", {}).get(
        "format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    handlers: list = [logging.StreamHandler()]
    if config.get("logging", {}).get("file_enabled", True):
        handlers.append(logging.FileHandler(log_dir / "acpd.log"))

    logging.basicConfig(level=log_level, format=log_format, handlers=handlers)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance under the package namespace.

    Args:
        name: Logger name, e.g. "solvers.pdhg"

    Returns:
        Logger instance
    """
    return logging.getLogger(f"acpd.{name}")
