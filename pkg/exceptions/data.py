"""
Data Exception Classes for SGG-HT

Provides specialized exceptions for dataset and checkpoint files and
for evaluation inputs.
"""

from __future__ import annotations

from typing import Any, Optional
from pathlib import Path

from exceptions.base import SGHTException


class DataError(SGHTException):
    """
    Base Data Exception

    Parent class for dataset, checkpoint and metric input errors.
    """

    default_error_code = 4000
    exit_code = 3

    def __init__(
        self,
        message: str,
        path: Optional[Path | str] = None,
        **kwargs: Any
    ) -> None:
        """
        Initialize data exception.

        Args:
            message: Error message
            path: File involved, if any
            **kwargs: Additional arguments
        """
        super().__init__(message, **kwargs)

        if path is not None:
            self.details["path"] = str(path)


class FormatError(DataError):
    """
    Format Error

    Raised when a file does not start with the expected magic bytes.
    """

    default_error_code = 4001

    def __init__(
        self,
        message: str = "Unrecognized file format",
        expected_magic: Optional[bytes] = None,
        found_magic: Optional[bytes] = None,
        **kwargs: Any
    ) -> None:
        super().__init__(message, **kwargs)

        if expected_magic is not None:
            self.details["expected_magic"] = expected_magic.decode("ascii", "replace")

        if found_magic is not None:
            self.details["found_magic"] = found_magic.decode("ascii", "replace")


class VersionError(DataError):
    """
    Version Error

    Raised for unsupported container versions and for checkpoints whose
    config digest does not match the active configuration.
    """

    default_error_code = 4002

    def __init__(
        self,
        message: str = "Incompatible version",
        expected: Optional[Any] = None,
        found: Optional[Any] = None,
        **kwargs: Any
    ) -> None:
        super().__init__(message, **kwargs)

        if expected is not None:
            self.details["expected"] = expected

        if found is not None:
            self.details["found"] = found


class CorruptionError(DataError):
    """
    Corruption Error

    Raised when a record is truncated or fails its checksum.
    """

    default_error_code = 4003

    def __init__(
        self,
        message: str = "Corrupted record",
        scene_index: Optional[int] = None,
        **kwargs: Any
    ) -> None:
        super().__init__(message, **kwargs)

        self.scene_index = scene_index
        if scene_index is not None:
            self.details["scene_index"] = scene_index


class MetricError(DataError):
    """
    Metric Error

    Raised when a metric cannot be computed, e.g. no scene carries a
    ground-truth triplet.
    """

    default_error_code = 4004
