"""
============================================================================
SGG-HT - CURRICULUM SCHEDULES
============================================================================
Decay functions φ(l) over the optimizer step l ∈ [0, L] and the per-class
curriculum factor

    λ_i = max(φ(l), α)   for head classes
    λ_i = 1              otherwise

    linear:       φ = 1 − l/L
    exponential:  φ = ν^(l/L)
    cosine:       φ = cos(π/2 · l/L)
============================================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable

import numpy as np

from config.constants import ScheduleKind
from exceptions import ConfigurationError, ContractError


@dataclass(frozen=True)
class ScheduleSpec:
    """
    Decay schedule parameters.

    Attributes:
        kind: decay function
        nu: exponential base, used only by ``exponential``
        alpha: floor of head-class factors
        total_iters: L
    """

    kind: ScheduleKind = ScheduleKind.LINEAR
    nu: float = 0.1
    alpha: float = 0.25
    total_iters: int = 3000

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not 0.0 < self.nu < 1.0:
            raise ConfigurationError(f"nu must lie in (0, 1), got {self.nu}", config_key="crm.nu")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}", config_key="crm.alpha")
        if self.total_iters < 1:
            raise ConfigurationError(
                f"total_iters must be at least 1, got {self.total_iters}",
                config_key="optim.total_iters",
            )


def phi(spec: ScheduleSpec, l: float) -> float:
    """
    Decay value at step ``l``.

    Raises:
        ContractError: when ``l`` is outside [0, L]
    """
    if l < 0 or l > spec.total_iters:
        raise ContractError(
            f"iteration {l} outside [0, {spec.total_iters}]",
            field="l",
            value=l,
        )
    t = l / spec.total_iters
    if spec.kind == ScheduleKind.LINEAR:
        return 1.0 - t
    if spec.kind == ScheduleKind.EXPONENTIAL:
        return spec.nu ** t
    return math.cos(math.pi / 2.0 * t)


def lambda_factor(spec: ScheduleSpec, l: float, head_set: Iterable[int], num_classes: int) -> np.ndarray:
    """
    ``[R+1]`` curriculum factors at step ``l``.

    Args:
        spec: schedule
        l: optimizer step
        head_set: head class indices
        num_classes: R+1
    """
    factors = np.ones(num_classes)
    decayed = max(phi(spec, l), spec.alpha)
    for c in head_set:
        factors[int(c)] = decayed
    return factors


@dataclass
class CurriculumState:
    """
    Step counter and current factors of a training run.

    Attributes:
        spec: schedule
        head_set: head classes
        num_classes: R+1
        enabled: when False the factors stay at 1
        iter: current step l
        lam: current ``[R+1]`` factors
    """

    spec: ScheduleSpec
    head_set: FrozenSet[int]
    num_classes: int
    enabled: bool = True
    iter: int = 0
    lam: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.lam = self._factors()

    def _factors(self) -> np.ndarray:
        if not self.enabled:
            return np.ones(self.num_classes)
        return lambda_factor(self.spec, self.iter, self.head_set, self.num_classes)

    def advance(self, l: int) -> np.ndarray:
        """Move to step ``l`` and return the factors."""
        self.iter = l
        self.lam = self._factors()
        return self.lam

    def probe_value(self, class_id: int) -> float:
        return float(self.lam[class_id])
