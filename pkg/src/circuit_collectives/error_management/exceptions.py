"""
Custom exception classes for the circuit collectives simulator.

Provides specialized exceptions for invalid parameters, unsupported configurations,
infeasible routing instances and malformed inputs or reports.
"""

from typing import Any, override

from src.circuit_collectives.config.error_constants import (
    ERROR_CONFIG,
    ERROR_INFEASIBLE,
    ERROR_REPORT_IO,
    ERROR_SCHEMA_VERSION,
    ERROR_SIZE,
    ERROR_TASK_GRAPH,
    ERROR_UNKNOWN,
    ERROR_UNSUPPORTED,
    ERROR_VALIDATION_GENERAL,
)


class CircuitCollectivesError(Exception):
    """Base exception for all simulator errors."""

    def __init__(
        self, message: str, error_code: str = ERROR_UNKNOWN, context: dict[str, Any] | None = None
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.context = context or {}

    @override
    def __str__(self) -> str:
        """Return string representation."""
        return f"{self.__class__.__name__}: {self.message}"


class ConfigurationError(CircuitCollectivesError):
    """Raised when configuration is invalid or missing."""

    def __init__(
        self,
        message: str,
        missing_config: str | None = None,
        context: dict[str, Any] | None = None,
    ):
        super().__init__(message, ERROR_CONFIG, context)
        self.missing_config = missing_config


class ValidationError(CircuitCollectivesError):
    """Raised when a parameter or input field fails validation."""

    def __init__(
        self, message: str, field: str, value: Any, context: dict[str, Any] | None = None
    ):
        super().__init__(message, ERROR_VALIDATION_GENERAL, context)
        self.field = field
        self.value = value


class UnsupportedError(CircuitCollectivesError):
    """Raised when a valid request falls outside what an algorithm supports."""

    def __init__(self, message: str, feature: str, context: dict[str, Any] | None = None):
        super().__init__(message, ERROR_UNSUPPORTED, context)
        self.feature = feature


class InfeasibleError(CircuitCollectivesError):
    """Raised when a routing instance has no solution at all."""

    def __init__(
        self, message: str, request: tuple[Any, Any], context: dict[str, Any] | None = None
    ):
        super().__init__(message, ERROR_INFEASIBLE, context)
        self.request = request


class InstanceTooLargeError(CircuitCollectivesError):
    """Raised when an exhaustive routine is asked to handle an oversized instance."""

    def __init__(
        self, message: str, limit: int, actual: int, context: dict[str, Any] | None = None
    ):
        super().__init__(message, ERROR_SIZE, context)
        self.limit = limit
        self.actual = actual


class TaskGraphError(CircuitCollectivesError):
    """Raised when a task graph is malformed (cycles, untagged nodes, bad references)."""

    def __init__(
        self, message: str, node: str | None = None, context: dict[str, Any] | None = None
    ):
        super().__init__(message, ERROR_TASK_GRAPH, context)
        self.node = node


class ReportIOError(CircuitCollectivesError):
    """Raised when a report or input file cannot be read or written."""

    def __init__(
        self, message: str, path: str, operation: str, context: dict[str, Any] | None = None
    ):
        super().__init__(message, ERROR_REPORT_IO, context)
        self.path = path
        self.operation = operation


class SchemaVersionError(CircuitCollectivesError):
    """Raised when a loaded document carries an unknown schema or version."""

    def __init__(
        self,
        message: str,
        schema: str | None,
        version: Any,
        context: dict[str, Any] | None = None,
    ):
        super().__init__(message, ERROR_SCHEMA_VERSION, context)
        self.schema = schema
        self.version = version


def is_usage_error(error: Exception) -> bool:
    """
    Determine whether an error stems from how the program was invoked.

    Args:
        error: The exception to check

    Returns:
        True for bad parameters, configuration or unsupported requests, False for
        failures that happen while running a valid request
    """
    return isinstance(
        error, ValidationError | ConfigurationError | UnsupportedError | SchemaVersionError
    )
