"""
Numeric Exception Classes for SGG-HT
"""

from __future__ import annotations

from typing import Any, Optional

from exceptions.base import SGHTException


class NumericError(SGHTException):
    """
    Numeric Error

    Raised when a forward op produces a non-finite value, or when a
    training step yields a non-finite loss.
    """

    default_error_code = 5000
    exit_code = 4

    def __init__(
        self,
        message: str = "Non-finite value encountered",
        op: Optional[str] = None,
        batch_id: Optional[int] = None,
        **kwargs: Any
    ) -> None:
        """
        Initialize numeric error.

        Args:
            message: Error message
            op: Name of the operation that produced the value
            batch_id: Training batch being processed, if known
            **kwargs: Additional arguments
        """
        super().__init__(message, **kwargs)

        self.op = op
        self.batch_id = batch_id

        if op:
            self.details["op"] = op

        if batch_id is not None:
            self.details["batch_id"] = batch_id
