"""
============================================================================
SGG-HT - SGD OPTIMIZER
============================================================================
Momentum SGD with global gradient-norm clipping.

    g ← g · min(1, clip_norm / ‖g‖)      (global norm over all params)
    v ← momentum · v + g
    p ← p − lr · v
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from autodiff.value import Value
from exceptions import ConfigurationError, DimensionError, NumericError


@dataclass
class OptState:
    """
    Optimizer state.

    Attributes:
        velocity: per-parameter velocity buffers, keyed like the parameters
        step_count: updates applied so far
    """

    velocity: Dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0


def global_grad_norm(params: Mapping[str, Value]) -> float:
    """L2 norm of all gradients taken together."""
    total = 0.0
    for p in params.values():
        total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def sgd_step(
    params: Mapping[str, Value],
    opt: OptState,
    lr: float,
    momentum: float = 0.9,
    clip_norm: float = 5.0,
) -> float:
    """
    Apply one clipped momentum-SGD update and zero the gradients.

    Args:
        params: trainable parameters by name
        opt: optimizer state, updated in place
        lr: learning rate
        momentum: velocity decay
        clip_norm: maximum global gradient norm

    Returns:
        Global gradient norm before clipping

    Raises:
        ConfigurationError: when lr ≤ 0 or clip_norm ≤ 0
        NumericError: when the gradient norm is not finite
    """
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}", config_key="optim.lr")
    if clip_norm <= 0:
        raise ConfigurationError(f"clip_norm must be positive, got {clip_norm}", config_key="optim.clip_norm")

    norm = global_grad_norm(params)
    if not np.isfinite(norm):
        raise NumericError("non-finite gradient norm", op="sgd_step")
    scale = clip_norm / norm if norm > clip_norm else 1.0

    for name, p in params.items():
        velocity = opt.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(p.data)
        elif velocity.shape != p.shape:
            raise DimensionError(
                f"velocity buffer for {name} has the wrong shape",
                expected=p.shape,
                actual=velocity.shape,
            )
        velocity = momentum * velocity + scale * p.grad
        opt.velocity[name] = velocity
        p.data -= lr * velocity
        p.zero_grad()

    opt.step_count += 1
    return norm
