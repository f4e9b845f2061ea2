"""
Exceptions Package for SGG-HT

Provides a coded exception hierarchy for error handling
throughout the application.
"""

from exceptions.base import (
    SGHTException,
    ConfigurationError,
)

from exceptions.validation import (
    ValidationException,
    ContractError,
    DimensionError,
)

from exceptions.data import (
    DataError,
    FormatError,
    VersionError,
    CorruptionError,
    MetricError,
)

from exceptions.numeric import NumericError

__all__ = [
    # Base exceptions
    "SGHTException",
    "ConfigurationError",

    # Validation exceptions
    "ValidationException",
    "ContractError",
    "DimensionError",

    # Data exceptions
    "DataError",
    "FormatError",
    "VersionError",
    "CorruptionError",
    "MetricError",

    # Numeric exceptions
    "NumericError",
]
