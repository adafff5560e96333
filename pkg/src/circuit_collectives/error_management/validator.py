"""
Input validation with detailed error context.

Every loader and generator funnels its parameter checks through here so that a bad value
is reported with its field name, which the CLI turns into a usage error.
"""

from collections.abc import Sequence
import math
from typing import Any

from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.error_management.exceptions import ValidationError

logger = get_logger("error_management.validation")


class Validator:
    """Validation utility with detailed error reporting."""

    @staticmethod
    def validate_integer(
        value: Any,
        field_name: str,
        min_value: int | None = None,
        max_value: int | None = None,
    ) -> int:
        """
        Validate integer input.

        Args:
            value: Value to validate
            field_name: Name of the field being validated
            min_value: Minimum allowed value
            max_value: Maximum allowed value

        Returns:
            Validated integer

        Raises:
            ValidationError: If validation fails
        """
        if value is None or value == "":
            raise ValidationError(
                f"{field_name} is required",
                field=field_name,
                value=value,
                context={"validation_type": "required"},
            )

        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValidationError(
                f"{field_name} must be a valid integer",
                field=field_name,
                value=value,
                context={"validation_type": "type_conversion"},
            )

        try:
            if isinstance(value, str):
                value = value.strip()
            int_value = int(value)
        except (ValueError, TypeError) as e:
            raise ValidationError(
                f"{field_name} must be a valid integer",
                field=field_name,
                value=value,
                context={"validation_type": "type_conversion", "original_error": str(e)},
            ) from e

        if min_value is not None and int_value < min_value:
            raise ValidationError(
                f"{field_name} must be at least {min_value}",
                field=field_name,
                value=int_value,
                context={"validation_type": "min_value", "min_value": min_value},
            )

        if max_value is not None and int_value > max_value:
            raise ValidationError(
                f"{field_name} must not exceed {max_value}",
                field=field_name,
                value=int_value,
                context={"validation_type": "max_value", "max_value": max_value},
            )

        return int_value

    @staticmethod
    def validate_number(
        value: Any,
        field_name: str,
        min_value: float | None = None,
        exclusive_min: bool = False,
    ) -> float:
        """
        Validate a finite real number.

        Args:
            value: Value to validate
            field_name: Name of the field being validated
            min_value: Lower bound
            exclusive_min: Whether the lower bound itself is rejected

        Returns:
            Validated float

        Raises:
            ValidationError: If validation fails
        """
        if value is None or isinstance(value, bool):
            raise ValidationError(
                f"{field_name} must be a number",
                field=field_name,
                value=value,
                context={"validation_type": "required"},
            )
        try:
            number = float(value)
        except (ValueError, TypeError) as e:
            raise ValidationError(
                f"{field_name} must be a number",
                field=field_name,
                value=value,
                context={"validation_type": "type_conversion", "original_error": str(e)},
            ) from e

        if not math.isfinite(number):
            raise ValidationError(
                f"{field_name} must be finite",
                field=field_name,
                value=value,
                context={"validation_type": "finite"},
            )

        if min_value is not None and (
            number < min_value or (exclusive_min and number == min_value)
        ):
            bound = "greater than" if exclusive_min else "at least"
            raise ValidationError(
                f"{field_name} must be {bound} {min_value}",
                field=field_name,
                value=number,
                context={
                    "validation_type": "min_value",
                    "min_value": min_value,
                    "exclusive": exclusive_min,
                },
            )

        return number

    @staticmethod
    def validate_boolean(value: Any, field_name: str) -> bool:
        """Validate a boolean flag; accepts true/false spellings from env or TOML."""
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.strip().lower() in {"true", "1", "yes", "on"}:
            return True
        if isinstance(value, str) and value.strip().lower() in {"false", "0", "no", "off"}:
            return False
        raise ValidationError(
            f"{field_name} must be a boolean",
            field=field_name,
            value=value,
            context={"validation_type": "type_conversion"},
        )

    @staticmethod
    def validate_choice(
        value: Any,
        field_name: str,
        choices: Sequence[Any],
        case_sensitive: bool = True,
    ) -> Any:
        """
        Validate that value is one of the allowed choices.

        Args:
            value: Value to validate
            field_name: Name of the field being validated
            choices: Allowed values
            case_sensitive: Whether string comparison should be case sensitive

        Returns:
            The matching choice (original spelling for case-insensitive matches)

        Raises:
            ValidationError: If validation fails
        """
        if value is None or (isinstance(value, str) and not value.strip()):
            raise ValidationError(
                f"{field_name} is required",
                field=field_name,
                value=value,
                context={"validation_type": "required", "choices": list(choices)},
            )

        if isinstance(value, str) and not case_sensitive:
            for choice in choices:
                if isinstance(choice, str) and choice.lower() == value.strip().lower():
                    return choice
        elif value in choices:
            return value

        raise ValidationError(
            f"{field_name} must be one of: {', '.join(map(str, choices))}",
            field=field_name,
            value=value,
            context={
                "validation_type": "invalid_choice",
                "choices": list(choices),
                "case_sensitive": case_sensitive,
            },
        )

    @staticmethod
    def validate_dict(
        value: Any, field_name: str, required_keys: Sequence[str] | None = None
    ) -> dict[str, Any]:
        """
        Validate dictionary input.

        Args:
            value: Value to validate
            field_name: Name of the field being validated
            required_keys: Keys that must be present

        Returns:
            Validated dictionary

        Raises:
            ValidationError: If validation fails
        """
        if not isinstance(value, dict):
            raise ValidationError(
                f"{field_name} must be a dictionary",
                field=field_name,
                value=type(value).__name__,
                context={"validation_type": "type_check"},
            )

        if required_keys:
            missing_keys = [key for key in required_keys if key not in value]
            if missing_keys:
                raise ValidationError(
                    f"{field_name} is missing required keys: {', '.join(missing_keys)}",
                    field=field_name,
                    value=sorted(value),
                    context={"validation_type": "missing_keys", "missing_keys": missing_keys},
                )

        return value

    @staticmethod
    def validate_sequence(value: Any, field_name: str, min_length: int = 0) -> list[Any]:
        """
        Validate a list-like value (strings are rejected).

        Raises:
            ValidationError: If validation fails
        """
        if isinstance(value, str | bytes) or not isinstance(value, Sequence):
            raise ValidationError(
                f"{field_name} must be a list",
                field=field_name,
                value=type(value).__name__,
                context={"validation_type": "type_check"},
            )
        if len(value) < min_length:
            raise ValidationError(
                f"{field_name} must contain at least {min_length} items",
                field=field_name,
                value=list(value),
                context={"validation_type": "min_length", "min_length": min_length},
            )
        return list(value)

    @staticmethod
    def validate_dims(
        value: Any, field_name: str = "dims", expected_length: int | None = None
    ) -> tuple[int, ...]:
        """
        Validate topology dimension sizes: nonempty, every size at least 2.

        Args:
            value: Sequence of sizes, or a string such as "4x4x4" / "4,4,4"
            field_name: Name of the field being validated
            expected_length: Required number of dimensions

        Returns:
            Dimension sizes as a tuple

        Raises:
            ValidationError: If validation fails
        """
        if isinstance(value, str):
            value = [part for part in value.replace("x", ",").split(",") if part.strip()]
        items = Validator.validate_sequence(value, field_name, min_length=1)
        dims = tuple(
            Validator.validate_integer(item, f"{field_name}[{i}]", min_value=2)
            for i, item in enumerate(items)
        )
        if expected_length is not None and len(dims) != expected_length:
            raise ValidationError(
                f"{field_name} must have {expected_length} entries, got {len(dims)}",
                field=field_name,
                value=list(dims),
                context={"validation_type": "dims_length", "expected_length": expected_length},
            )
        return dims

    @staticmethod
    def validate_power_of_two(value: Any, field_name: str) -> int:
        """Validate a power-of-two integer of at least 2."""
        number = Validator.validate_integer(value, field_name, min_value=2)
        if number & (number - 1):
            raise ValidationError(
                f"{field_name} must be a power of two",
                field=field_name,
                value=number,
                context={"validation_type": "power_of_two"},
            )
        return number
