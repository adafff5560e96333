"""
Logging configuration for the circuit collectives simulator.

Console output goes to stderr so that stdout only carries emitted reports. In development
the console shows aligned text lines; any other ENVIRONMENT switches every handler to
one JSON object per line. Rotating files under LOG_DIR keep the history of long sweeps.
"""

import json
import logging
import logging.config
from pathlib import Path
import sys
from typing import Any, override

from src.circuit_collectives.config.key_constants import (
    DEFAULT_ENVIRONMENT,
    DEFAULT_LOG_DIR,
    ENVIRONMENT_ENV,
    LOG_DIR_ENV,
    LOG_LEVEL_ENV,
    get_config_path,
    get_configuration_value,
)

PACKAGE_LOGGER = "circuit_collectives"
VALID_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5

TEXT_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)-36s | %(context_tag)s%(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# LogRecord attributes that are not caller-supplied ``extra`` fields.
_RECORD_FIELDS = frozenset(
    vars(logging.LogRecord("", logging.INFO, "", 0, "", None, None))
) | {"message", "asctime", "context_tag"}


def record_extras(record: logging.LogRecord) -> dict[str, Any]:
    """Fields passed through ``extra=`` on the logging call."""
    return {k: v for k, v in vars(record).items() if k not in _RECORD_FIELDS}


class StructuredFormatter(logging.Formatter):
    """Text formatter that prefixes the scenario or command a record belongs to."""

    @override
    def format(self, record: logging.LogRecord) -> str:
        tag = getattr(record, "scenario", None) or getattr(record, "command", None)
        record.context_tag = f"[{tag}] " if tag else ""
        return super().format(record)


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record, extras included."""

    @override
    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "timestamp": self.formatTime(record, DATE_FORMAT),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        payload.update(record_extras(record))
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def get_log_level() -> str:
    """LOG_LEVEL from the environment, INFO when unset or unknown."""
    level = (get_configuration_value(LOG_LEVEL_ENV) or "INFO").upper()
    return level if level in VALID_LEVELS else "INFO"


def use_json_logs() -> bool:
    environment = get_configuration_value(ENVIRONMENT_ENV, DEFAULT_ENVIRONMENT) or ""
    return environment.lower() != DEFAULT_ENVIRONMENT


def build_logging_config(level: str, log_dir: Path, json_lines: bool) -> dict[str, Any]:
    """dictConfig schema for the package logger tree."""

    def rotating(filename: str, file_level: str) -> dict[str, Any]:
        return {
            "class": "logging.handlers.RotatingFileHandler",
            "level": file_level,
            "formatter": "default",
            "filename": str(log_dir / filename),
            "maxBytes": LOG_FILE_MAX_BYTES,
            "backupCount": LOG_FILE_BACKUPS,
            "delay": True,
        }

    formatter: dict[str, Any] = (
        {"()": JsonLineFormatter}
        if json_lines
        else {"()": StructuredFormatter, "format": TEXT_FORMAT, "datefmt": DATE_FORMAT}
    )
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {"default": formatter},
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": level,
                "formatter": "default",
                "stream": sys.stderr,
            },
            "simulation_file": rotating("simulation.log", "INFO"),
            "error_file": rotating("error.log", "ERROR"),
        },
        "loggers": {
            PACKAGE_LOGGER: {
                "level": level,
                "handlers": ["console", "simulation_file", "error_file"],
                "propagate": False,
            },
            "networkx": {"level": "WARNING", "handlers": ["console"], "propagate": False},
        },
        "root": {"level": "WARNING", "handlers": ["console"]},
    }


def setup_logging() -> None:
    """
    Configure logging for the process.

    Called once by the CLI before a subcommand runs. Worker processes of a scenario sweep
    inherit no configuration and log through the root logger's defaults.
    """
    level = get_log_level()
    log_dir = Path(get_configuration_value(LOG_DIR_ENV, DEFAULT_LOG_DIR) or DEFAULT_LOG_DIR)
    log_dir.mkdir(parents=True, exist_ok=True)

    logging.config.dictConfig(build_logging_config(level, log_dir, use_json_logs()))

    get_logger("config.logging").debug(
        "Logging configured",
        extra={"log_level": level, "log_dir": str(log_dir), "config_file": get_config_path()},
    )


def get_logger(name: str) -> logging.Logger:
    """
    Logger under the package namespace.

    Example:
        logger = get_logger("tools.reconfig_planner")
    """
    if not name.startswith(PACKAGE_LOGGER):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)


def log_function_call(command: str, **params: Any) -> None:
    """Record a CLI subcommand and its arguments, long values cut to 100 characters."""
    get_logger("cli").debug(
        f"Running {command}",
        extra={"command": command, "parameters": {k: str(v)[:100] for k, v in params.items()}},
    )


class LoggerMixin:
    """Gives a class a ``logger`` named after its module and class."""

    @property
    def logger(self) -> logging.Logger:
        module = self.__class__.__module__.removeprefix("src.circuit_collectives.")
        return get_logger(f"{module}.{self.__class__.__name__}")
