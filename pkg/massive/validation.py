"""
Centralized validation module for the MASSIVE toolkit.

Provides consistent argument checks for every physics module so that
non-physical inputs are rejected with a message naming the parameter and
the calling context, instead of propagating NaNs into downstream budgets.
"""
import logging
import math
from typing import Any

from massive.errors import InvalidInputError
from massive.logging_utils import get_module_logger, log_with_context

logger = get_module_logger(__name__)


def _as_float(value: Any, name: str, context: str) -> float:
    if isinstance(value, bool):
        raise InvalidInputError(f"{context}: {name} must be a number, got bool")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{context}: {name} must be a number, got {value!r}")
    return number


def validate_finite(value: Any, name: str, context: str = "input") -> float:
    """
    Validate that a value is a finite real number.

    Args:
        value: The value to check
        name: Parameter name used in error messages
        context: Calling context for error messages and logging

    Returns:
        The value as float

    Raises:
        InvalidInputError: If the value is not a finite number
    """
    number = _as_float(value, name, context)
    if not math.isfinite(number):
        raise InvalidInputError(f"{context}: {name} must be finite, got {number}")
    log_with_context(
        logger,
        logging.DEBUG,
        "Validation",
        "Value validated",
        {"context": context, "name": name, "value": number}
    )
    return number


def validate_positive(value: Any, name: str, context: str = "input") -> float:
    """Validate a finite, strictly positive number."""
    number = validate_finite(value, name, context)
    if number <= 0:
        raise InvalidInputError(f"{context}: {name} must be positive, got {number}")
    return number


def validate_non_negative(value: Any, name: str, context: str = "input") -> float:
    """Validate a finite number that is zero or positive."""
    number = validate_finite(value, name, context)
    if number < 0:
        raise InvalidInputError(f"{context}: {name} must be non-negative, got {number}")
    return number


def validate_probability(value: Any, name: str, context: str = "input") -> float:
    """Validate a number in the closed interval [0, 1]."""
    number = validate_finite(value, name, context)
    if not 0.0 <= number <= 1.0:
        raise InvalidInputError(f"{context}: {name} must be between 0 and 1, got {number}")
    return number


def validate_int_at_least(value: Any, minimum: int, name: str, context: str = "input") -> int:
    """
    Validate an integer no smaller than ``minimum``.

    Floats with an integral value are accepted; bools are not.

    Raises:
        InvalidInputError: If the value is not an integer or is too small
    """
    if isinstance(value, bool):
        raise InvalidInputError(f"{context}: {name} must be an integer, got bool")
    if isinstance(value, float):
        if not value.is_integer():
            raise InvalidInputError(f"{context}: {name} must be an integer, got {value}")
        value = int(value)
    if not isinstance(value, int) and not hasattr(value, "__index__"):
        raise InvalidInputError(f"{context}: {name} must be an integer, got {value!r}")
    number = int(value)
    if number < minimum:
        raise InvalidInputError(f"{context}: {name} must be >= {minimum}, got {number}")
    return number
