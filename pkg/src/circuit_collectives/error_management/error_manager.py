"""
Error management with centralized logging and exit-code mapping for the CLI.
"""

from typing import Any

from src.circuit_collectives.config.error_constants import (
    EXIT_RUNTIME_ERROR,
    EXIT_USAGE_ERROR,
    USER_MESSAGE_UNEXPECTED,
)
from src.circuit_collectives.config.logging_config import LoggerMixin
from src.circuit_collectives.error_management.exceptions import (
    CircuitCollectivesError,
    ConfigurationError,
    ReportIOError,
    ValidationError,
    is_usage_error,
)


class ErrorManager(LoggerMixin):
    """
    Centralized error management with structured logging and context preservation.
    """

    def handle_error(
        self,
        error: Exception,
        context: dict[str, Any] | None = None,
        user_message: str | None = None,
    ) -> str:
        """
        Handle errors with structured logging and user-friendly messages.

        Args:
            error: The exception that occurred
            context: Additional context information
            user_message: Custom user-friendly message

        Returns:
            User-friendly error message
        """
        if user_message is None:
            user_message = (
                error.message
                if isinstance(error, CircuitCollectivesError)
                else USER_MESSAGE_UNEXPECTED
            )

        error_context: dict[str, Any] = {
            "error_type": type(error).__name__,
            "error_message": str(error),
        }
        if isinstance(error, CircuitCollectivesError):
            error_context["error_code"] = error.error_code
            error_context["error_context"] = error.context
        if context:
            error_context.update(context)

        # Usage errors are the caller's mistake; no traceback needed
        self.logger.error(
            f"Error handled: {type(error).__name__}: {error!s}",
            exc_info=not is_usage_error(error),
            extra=error_context,
        )

        return user_message

    def handle_validation_error(self, error: ValidationError) -> str:
        """
        Handle validation errors with field context.

        Args:
            error: The validation exception

        Returns:
            User-friendly error message naming the offending field
        """
        context: dict[str, Any] = {
            "field": error.field,
            "value": str(error.value)[:100],  # Truncate long values
            "error_category": "validation",
        }
        return self.handle_error(error, context, f"Invalid {error.field}: {error.message}")

    def handle_configuration_error(self, error: ConfigurationError) -> str:
        """
        Handle configuration errors with context.

        Args:
            error: The configuration exception

        Returns:
            User-friendly error message
        """
        context: dict[str, Any] = {
            "config_name": error.missing_config,
            "error_category": "configuration",
        }
        return self.handle_error(error, context, f"Configuration error: {error.message}")

    def handle_report_io_error(self, error: ReportIOError) -> str:
        """
        Handle report read/write failures with the file path.

        Args:
            error: The I/O exception

        Returns:
            User-friendly error message including the path
        """
        context: dict[str, Any] = {
            "path": error.path,
            "operation": error.operation,
            "error_category": "report_io",
        }
        return self.handle_error(error, context, f"{error.operation} failed: {error.message}")

    def dispatch(self, error: Exception) -> str:
        """Route an error to the most specific handler."""
        if isinstance(error, ValidationError):
            return self.handle_validation_error(error)
        if isinstance(error, ConfigurationError):
            return self.handle_configuration_error(error)
        if isinstance(error, ReportIOError):
            return self.handle_report_io_error(error)
        return self.handle_error(error)

    @staticmethod
    def exit_code_for(error: Exception) -> int:
        """Map an error to the CLI exit code (2 for usage errors, 1 otherwise)."""
        return EXIT_USAGE_ERROR if is_usage_error(error) else EXIT_RUNTIME_ERROR
