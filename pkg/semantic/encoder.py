"""
============================================================================
SGG-HT - TRANSFORMER ENCODER
============================================================================
Post-norm encoder layers without positional encodings:

    x ← LN(x + MHA(x))
    x ← LN(x + W2·GELU(W1·x + b1) + b2)

Rows are an unordered set, so the encoder is permutation equivariant.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from autodiff import AttentionParams, Value, layer_norm, linear, multi_head_attention
from autodiff.init import ones, xavier_uniform, zeros
from exceptions import ConfigurationError, DimensionError


@dataclass
class EncoderLayerParams:
    """Parameters of one encoder layer."""

    attention: AttentionParams
    ln1_gain: Value
    ln1_bias: Value
    ff_w1: Value
    ff_b1: Value
    ff_w2: Value
    ff_b2: Value
    ln2_gain: Value
    ln2_bias: Value

    def named(self, prefix: str) -> Dict[str, Value]:
        a = self.attention
        return {
            f"{prefix}.attn.wq": a.wq,
            f"{prefix}.attn.bq": a.bq,
            f"{prefix}.attn.wk": a.wk,
            f"{prefix}.attn.bk": a.bk,
            f"{prefix}.attn.wv": a.wv,
            f"{prefix}.attn.bv": a.bv,
            f"{prefix}.attn.wo": a.wo,
            f"{prefix}.attn.bo": a.bo,
            f"{prefix}.ln1.gain": self.ln1_gain,
            f"{prefix}.ln1.bias": self.ln1_bias,
            f"{prefix}.ff.w1": self.ff_w1,
            f"{prefix}.ff.b1": self.ff_b1,
            f"{prefix}.ff.w2": self.ff_w2,
            f"{prefix}.ff.b2": self.ff_b2,
            f"{prefix}.ln2.gain": self.ln2_gain,
            f"{prefix}.ln2.bias": self.ln2_bias,
        }


@dataclass
class EncoderParams:
    """Stack of encoder layers sharing width and head count."""

    layers: List[EncoderLayerParams] = field(default_factory=list)
    heads: int = 4

    @property
    def d_model(self) -> int:
        return self.layers[0].attention.d_model

    def named(self, prefix: str = "scm.encoder") -> Dict[str, Value]:
        out: Dict[str, Value] = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named(f"{prefix}.{i}"))
        return out


def init_encoder(
    rng: np.random.Generator,
    d_model: int,
    num_layers: int = 2,
    heads: int = 4,
    ff_mult: int = 2,
    scale: float = 1.0,
    prefix: str = "scm.encoder",
) -> EncoderParams:
    """
    Xavier-initialized encoder.

    Raises:
        ConfigurationError: when d_model is not divisible by heads
    """
    if heads < 1 or d_model % heads != 0:
        raise ConfigurationError(
            f"d_model={d_model} is not divisible by heads={heads}", config_key="scm.heads"
        )
    ff = ff_mult * d_model
    layers = []
    for i in range(num_layers):
        p = f"{prefix}.{i}"
        attention = AttentionParams(
            wq=xavier_uniform(rng, d_model, d_model, f"{p}.attn.wq", scale),
            bq=zeros(d_model, f"{p}.attn.bq"),
            wk=xavier_uniform(rng, d_model, d_model, f"{p}.attn.wk", scale),
            bk=zeros(d_model, f"{p}.attn.bk"),
            wv=xavier_uniform(rng, d_model, d_model, f"{p}.attn.wv", scale),
            bv=zeros(d_model, f"{p}.attn.bv"),
            wo=xavier_uniform(rng, d_model, d_model, f"{p}.attn.wo", scale),
            bo=zeros(d_model, f"{p}.attn.bo"),
            heads=heads,
        )
        layers.append(
            EncoderLayerParams(
                attention=attention,
                ln1_gain=ones(d_model, f"{p}.ln1.gain"),
                ln1_bias=zeros(d_model, f"{p}.ln1.bias"),
                ff_w1=xavier_uniform(rng, d_model, ff, f"{p}.ff.w1", scale),
                ff_b1=zeros(ff, f"{p}.ff.b1"),
                ff_w2=xavier_uniform(rng, ff, d_model, f"{p}.ff.w2", scale),
                ff_b2=zeros(d_model, f"{p}.ff.b2"),
                ln2_gain=ones(d_model, f"{p}.ln2.gain"),
                ln2_bias=zeros(d_model, f"{p}.ln2.bias"),
            )
        )
    return EncoderParams(layers=layers, heads=heads)


def encoder_layer(x: Value, layer: EncoderLayerParams) -> Value:
    """One post-norm layer over ``[N×D]`` rows."""
    x = layer_norm(x + multi_head_attention(x, layer.attention), layer.ln1_gain, layer.ln1_bias)
    hidden = linear(x, layer.ff_w1, layer.ff_b1).gelu()
    return layer_norm(x + linear(hidden, layer.ff_w2, layer.ff_b2), layer.ln2_gain, layer.ln2_bias)


def encode(x: Value, params: EncoderParams) -> Value:
    """
    Apply every layer; output shape equals input shape.

    Raises:
        DimensionError: when rows are not ``[N×D]``
    """
    if x.ndim != 2 or x.shape[1] != params.d_model:
        raise DimensionError(
            "encoder input must be [N×D]",
            expected=[-1, params.d_model],
            actual=x.shape,
        )
    for layer in params.layers:
        x = encoder_layer(x, layer)
    return x
