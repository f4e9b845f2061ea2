"""
============================================================================
SGG-HT - DIFFERENTIABLE FUNCTIONS
============================================================================
Composite and fused primitives built on ``Value``: log-softmax, softmax,
layer normalization, affine maps and multi-head self-attention.
============================================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from autodiff.value import Value, concat
from config.constants import LAYER_NORM_EPS
from exceptions import ConfigurationError, DimensionError


# ============================================================================
# SOFTMAX FAMILY
# ============================================================================

def log_softmax(z: Value, axis: int = -1) -> Value:
    """
    log(e^{z_i} / Σ_j e^{z_j}) along ``axis`` with max-subtraction.

    Raises:
        DimensionError: on an empty axis
    """
    if z.ndim == 0 or z.shape[axis] < 1:
        raise DimensionError("log_softmax needs at least one class", actual=z.shape)
    shifted = z.data - z.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g: np.ndarray) -> None:
        z.grad += g - np.exp(out) * g.sum(axis=axis, keepdims=True)

    return Value.make(out, (z,), backward, "log_softmax")


def softmax(z: Value, axis: int = -1) -> Value:
    """Softmax along ``axis``."""
    if z.ndim == 0 or z.shape[axis] < 1:
        raise DimensionError("softmax needs at least one class", actual=z.shape)
    shifted = z.data - z.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        z.grad += out * (g - (g * out).sum(axis=axis, keepdims=True))

    return Value.make(out, (z,), backward, "softmax")


# ============================================================================
# NORMALIZATION AND AFFINE MAPS
# ============================================================================

def layer_norm(x: Value, gain: Value, bias: Value, eps: float = LAYER_NORM_EPS) -> Value:
    """
    Normalize each row to zero mean and unit variance (ε in the
    denominator), then apply the elementwise affine ``gain``/``bias``.

    Raises:
        DimensionError: when the normalized width is below 2 or the affine
            parameters do not match it
    """
    width = x.shape[-1] if x.ndim else 0
    if width < 2:
        raise DimensionError("layer_norm needs a width of at least 2", actual=x.shape)
    if gain.shape != (width,) or bias.shape != (width,):
        raise DimensionError(
            "layer_norm gain/bias must match the row width",
            expected=[width],
            actual=[gain.shape[0] if gain.ndim else 0, bias.shape[0] if bias.ndim else 0],
        )

    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data
    lead = tuple(range(x.ndim - 1))

    def backward(g: np.ndarray) -> None:
        if gain.requires_grad:
            gain.grad += (g * xhat).sum(axis=lead)
        if bias.requires_grad:
            bias.grad += g.sum(axis=lead)
        if x.requires_grad:
            dxhat = g * gain.data
            x.grad += (inv / width) * (
                width * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )

    return Value.make(out, (x, gain, bias), backward, "layer_norm")


def linear(x: Value, weight: Value, bias: Optional[Value] = None) -> Value:
    """Affine map ``x·W + b``."""
    out = x @ weight
    return out + bias if bias is not None else out


# ============================================================================
# MULTI-HEAD SELF-ATTENTION
# ============================================================================

@dataclass
class AttentionParams:
    """
    Projection parameters of one self-attention block. Weights are
    ``[D×D]``, biases ``[D]``.
    """

    wq: Value
    bq: Value
    wk: Value
    bk: Value
    wv: Value
    bv: Value
    wo: Value
    bo: Value
    heads: int

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]


def multi_head_attention(
    x: Value,
    params: AttentionParams,
    return_weights: bool = False,
) -> Value | Tuple[Value, List[np.ndarray]]:
    """
    Scaled dot-product self-attention where queries, keys and values
    share the input. Heads are concatenated and output-projected.

    Args:
        x: ``[N×D]`` input rows
        params: projections and head count
        return_weights: also return per-head ``[N×N]`` attention matrices

    Returns:
        ``[N×D]`` output (and the weights when requested)

    Raises:
        ConfigurationError: when D is not divisible by the head count
    """
    if x.ndim != 2:
        raise DimensionError("attention input must be [N×D]", actual=x.shape)
    d_model = x.shape[1]
    if d_model != params.d_model:
        raise DimensionError("attention width mismatch", expected=[params.d_model], actual=[d_model])
    if params.heads < 1 or d_model % params.heads != 0:
        raise ConfigurationError(
            f"d_model={d_model} is not divisible by heads={params.heads}",
            config_key="scm.heads",
        )

    d_head = d_model // params.heads
    scale = 1.0 / math.sqrt(d_head)

    q = linear(x, params.wq, params.bq)
    k = linear(x, params.wk, params.bk)
    v = linear(x, params.wv, params.bv)

    outputs: List[Value] = []
    weights: List[np.ndarray] = []
    for h in range(params.heads):
        cols = (slice(None), slice(h * d_head, (h + 1) * d_head))
        qh, kh, vh = q[cols], k[cols], v[cols]
        attn = softmax((qh @ kh.T) * scale, axis=-1)
        weights.append(attn.data)
        outputs.append(attn @ vh)

    out = linear(concat(outputs, axis=1), params.wo, params.bo)
    if return_weights:
        return out, weights
    return out


# ============================================================================
# END OF FUNCTIONAL MODULE
# ============================================================================
