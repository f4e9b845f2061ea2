"""
Validation Exception Classes for SGG-HT

Contract and shape violations raised by the numeric layers. These are
programming faults rather than user errors, so they map to the generic
exit code.
"""

from __future__ import annotations

from typing import Any, Optional, Sequence
from exceptions.base import SGHTException


class ValidationException(SGHTException):
    """
    Base Validation Exception

    Parent class for all validation-related exceptions.
    """

    default_error_code = 3000

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        value: Optional[Any] = None,
        **kwargs: Any
    ) -> None:
        """
        Initialize validation exception.

        Args:
            message: Error message
            field: The argument that failed validation
            value: The invalid value (sanitized)
            **kwargs: Additional arguments
        """
        super().__init__(message, **kwargs)

        if field:
            self.details["field"] = field

        if value is not None:
            self.details["value"] = self._sanitize_value(value)

    @staticmethod
    def _sanitize_value(value: Any) -> str:
        """
        Sanitize value for logging.

        Args:
            value: The value to sanitize

        Returns:
            Sanitized string representation
        """
        str_value = str(value)

        # Truncate long values
        if len(str_value) > 100:
            str_value = str_value[:100] + "..."

        return str_value


class ContractError(ValidationException):
    """
    Contract Error

    Raised when an operation's precondition does not hold, e.g. a
    non-scalar passed to backward or a label that is not one-hot.
    """

    default_error_code = 3001


class DimensionError(ValidationException):
    """
    Dimension Error

    Raised when operand shapes are incompatible.
    """

    default_error_code = 3002

    def __init__(
        self,
        message: str = "Dimension mismatch",
        expected: Optional[Sequence[int]] = None,
        actual: Optional[Sequence[int]] = None,
        **kwargs: Any
    ) -> None:
        """
        Initialize dimension error.

        Args:
            message: Error message
            expected: Expected shape or dimension
            actual: Shape or dimension received
            **kwargs: Additional arguments
        """
        super().__init__(message, **kwargs)

        if expected is not None:
            self.details["expected"] = list(expected)

        if actual is not None:
            self.details["actual"] = list(actual)
