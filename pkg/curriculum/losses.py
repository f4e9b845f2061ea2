"""
============================================================================
SGG-HT - CURRICULUM RE-WEIGHTED LOSS
============================================================================
Cross-entropy and its curriculum re-weighted form

    L_CE  = −Σ_i y_i · log softmax(z)_i
    L_CRW = −Σ_i λ_i w_i y_i · log softmax(z)_i

For a one-hot y the re-weighted loss is λ_gt·w_gt·L_CE.
============================================================================
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from autodiff import Value, log_softmax
from exceptions import ContractError, DimensionError
from utils.validators import ArrayValidator


def _require_width(name: str, vec: np.ndarray, width: int) -> None:
    if vec.shape != (width,):
        raise DimensionError(
            f"{name} must have length {width}, got shape {vec.shape}",
            expected=[width],
            actual=vec.shape,
            field=name,
        )


def ce_loss(z: Value, y: np.ndarray) -> Value:
    """
    Cross-entropy of logits ``z [R+1]`` against a one-hot ``y``.

    Raises:
        ContractError: when ``y`` is not one-hot
        DimensionError: when ``y`` and ``z`` differ in length
    """
    y = np.asarray(y, dtype=np.float64)
    gt = ArrayValidator.require_one_hot(y)
    _require_width("y", y, z.shape[-1])
    return -log_softmax(z)[gt]


def crw_loss(z: Value, y: np.ndarray, weights: np.ndarray, lam: np.ndarray) -> Value:
    """
    Curriculum re-weighted cross-entropy for one pair.

    Args:
        z: ``[R+1]`` logits
        y: one-hot label
        weights: ``[R+1]`` class weights w
        lam: ``[R+1]`` curriculum factors λ

    Raises:
        ContractError: when ``y`` is not one-hot
        DimensionError: on length mismatch
    """
    y = np.asarray(y, dtype=np.float64)
    gt = ArrayValidator.require_one_hot(y)
    width = z.shape[-1]
    _require_width("y", y, width)
    _require_width("weights", np.asarray(weights), width)
    _require_width("lambda", np.asarray(lam), width)
    return -log_softmax(z)[gt] * float(lam[gt] * weights[gt])


def crw_loss_pairs(
    z: Value,
    labels: Sequence[int],
    weights: np.ndarray,
    lam: np.ndarray,
) -> Value:
    """
    Pair-averaged re-weighted loss over a ``[P×(R+1)]`` logit matrix.

    Equal to the mean of ``crw_loss`` over the P rows.

    Raises:
        ContractError: when there are no pairs or a label is out of range
    """
    labels = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or z.shape[0] != labels.shape[0]:
        raise DimensionError("logits must be [P×(R+1)] with one label per row", actual=z.shape)
    if labels.shape[0] == 0:
        raise ContractError("re-weighted loss needs at least one pair", field="labels")
    width = z.shape[1]
    if np.any(labels < 0) or np.any(labels >= width):
        raise ContractError("pair label outside 0..R", field="labels")
    _require_width("weights", np.asarray(weights), width)
    _require_width("lambda", np.asarray(lam), width)

    coeff = np.asarray(lam)[labels] * np.asarray(weights)[labels]
    picked = log_softmax(z, axis=-1)[np.arange(labels.shape[0]), labels]
    return -(picked * coeff).sum() * (1.0 / labels.shape[0])
