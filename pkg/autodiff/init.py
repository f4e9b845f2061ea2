"""
Parameter initializers.
"""

from __future__ import annotations

import numpy as np

from autodiff.value import Value


def xavier_uniform(
    rng: np.random.Generator,
    fan_in: int,
    fan_out: int,
    name: str,
    scale: float = 1.0,
) -> Value:
    """Trainable ``[fan_in×fan_out]`` weight, U(±scale·sqrt(6/(fan_in+fan_out)))."""
    bound = scale * np.sqrt(6.0 / (fan_in + fan_out))
    return Value(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(width: int, name: str) -> Value:
    """Trainable zero vector."""
    return Value(np.zeros(width), requires_grad=True, name=name)


def ones(width: int, name: str) -> Value:
    """Trainable vector of ones (layer-norm gains)."""
    return Value(np.ones(width), requires_grad=True, name=name)
