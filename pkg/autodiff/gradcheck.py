"""
============================================================================
SGG-HT - FINITE-DIFFERENCE GRADIENT CHECK
============================================================================
Compares reverse-mode gradients against central differences

    ∂f/∂θ ≈ (f(θ + h) − f(θ − h)) / 2h,     h = 1e-4

Relative error is |a − n| / max(|a|, |n|, floor); the floor keeps
vanishing gradients from being judged on noise.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from autodiff.value import Value, backward


@dataclass
class GradCheckResult:
    """Outcome of a gradient check."""

    max_rel_error: float
    worst_param: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    analytic: float
    numeric: float
    checked: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def relative_error(analytic: float, numeric: float, floor: float = 1e-3) -> float:
    """|a − n| / max(|a|, |n|, floor)."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(
    build_loss: Callable[[], Value],
    params: Mapping[str, Value],
    h: float = 1e-4,
    max_entries_per_param: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    floor: float = 1e-3,
) -> GradCheckResult:
    """
    Check every (or a sampled subset of every) parameter entry.

    Args:
        build_loss: rebuilds the graph from the current parameter data and
            returns the scalar loss
        params: parameters to check, by name
        h: central-difference step
        max_entries_per_param: sample at most this many entries per parameter
        rng: generator used for sampling entries
        floor: relative-error denominator floor

    Returns:
        GradCheckResult with the worst entry
    """
    for p in params.values():
        p.zero_grad()
    loss = build_loss()
    backward(loss)
    analytic: Dict[str, np.ndarray] = {name: p.grad.copy() for name, p in params.items()}

    worst = GradCheckResult(0.0, None, None, 0.0, 0.0, 0)
    checked = 0
    for name, p in params.items():
        indices = list(np.ndindex(p.shape))
        if max_entries_per_param is not None and len(indices) > max_entries_per_param:
            rng = rng or np.random.default_rng(0)
            picks = rng.choice(len(indices), size=max_entries_per_param, replace=False)
            indices = [indices[i] for i in sorted(picks)]
        for idx in indices:
            original = p.data[idx]
            p.data[idx] = original + h
            f_plus = build_loss().item()
            p.data[idx] = original - h
            f_minus = build_loss().item()
            p.data[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[name][idx])
            err = relative_error(a, numeric, floor)
            checked += 1
            if err > worst.max_rel_error or worst.worst_param is None:
                worst = GradCheckResult(err, name, tuple(int(i) for i in idx), a, numeric, 0)

    for p in params.values():
        p.zero_grad()
    worst.checked = checked
    return worst
