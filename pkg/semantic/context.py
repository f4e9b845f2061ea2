"""
============================================================================
SGG-HT - SEMANTIC CONTEXT
============================================================================
Triplet semantics, the global node, contextual encoding, the
semantic-consistency loss and logits fusion.

    s_r      = [s_s ; s_p ; s_o] · W              (600 → D)
    s_global = mean_i s_r,i
    S̃        = Encoder([S_r ; s_global])          (global variant)
    L_SC     = (1/D)·‖s̃_global − t̃_global‖²
    z        = z' + z̃,   z̃ = S̃_i · W_c + b_c
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np

from autodiff import Value, concat, linear
from autodiff.init import xavier_uniform, zeros
from config.constants import EMBEDDING_DIM, ScmVariant
from exceptions import ContractError, DimensionError
from semantic.encoder import EncoderParams, encode, init_encoder


# ============================================================================
# PARAMETERS
# ============================================================================

@dataclass
class ScmParams:
    """
    Semantic context parameters, shared by the predicted and
    ground-truth branches.

    Attributes:
        projection: ``[600×D]`` W
        encoder: transformer stack
        classifier_w: ``[D×(R+1)]`` z̃ classifier
        classifier_b: ``[R+1]``
    """

    projection: Value
    encoder: EncoderParams
    classifier_w: Value
    classifier_b: Value

    @property
    def d_model(self) -> int:
        return int(self.projection.shape[1])

    def named(self) -> Dict[str, Value]:
        out = {"scm.projection": self.projection}
        out.update(self.encoder.named("scm.encoder"))
        out["scm.classifier.w"] = self.classifier_w
        out["scm.classifier.b"] = self.classifier_b
        return out


def init_scm(
    rng: np.random.Generator,
    d_model: int,
    num_classes: int,
    num_layers: int = 2,
    heads: int = 4,
    ff_mult: int = 2,
    scale: float = 1.0,
) -> ScmParams:
    """Xavier-initialized semantic context parameters."""
    projection = xavier_uniform(rng, 3 * EMBEDDING_DIM, d_model, "scm.projection", scale)
    encoder = init_encoder(rng, d_model, num_layers, heads, ff_mult, scale)
    return ScmParams(
        projection=projection,
        encoder=encoder,
        classifier_w=xavier_uniform(rng, d_model, num_classes, "scm.classifier.w", scale),
        classifier_b=zeros(num_classes, "scm.classifier.b"),
    )


# ============================================================================
# OPERATIONS
# ============================================================================

def _as_value(x: Union[Value, np.ndarray]) -> Value:
    return Value.lift(x)


def triplet_semantic(
    s_s: Union[Value, np.ndarray],
    s_p: Union[Value, np.ndarray],
    s_o: Union[Value, np.ndarray],
    projection: Value,
) -> Value:
    """
    Project concatenated subject/predicate/object embeddings.

    Inputs are ``[200]`` vectors or ``[N×200]`` row batches.

    Raises:
        DimensionError: when an input is not 200 wide or W is not 600 rows
    """
    parts = [_as_value(s_s), _as_value(s_p), _as_value(s_o)]
    for name, part in zip(("subject", "predicate", "object"), parts):
        if part.ndim not in (1, 2) or part.shape[-1] != EMBEDDING_DIM:
            raise DimensionError(
                f"{name} embedding must be {EMBEDDING_DIM} wide",
                expected=[EMBEDDING_DIM],
                actual=part.shape,
                field=name,
            )
    if len({p.ndim for p in parts}) != 1 or (parts[0].ndim == 2 and len({p.shape[0] for p in parts}) != 1):
        raise DimensionError("triplet embeddings must share a shape", actual=[p.shape for p in parts])
    if projection.ndim != 2 or projection.shape[0] != 3 * EMBEDDING_DIM:
        raise DimensionError(
            "projection must be [600×D]",
            expected=[3 * EMBEDDING_DIM, -1],
            actual=projection.shape,
        )
    return concat(parts, axis=-1 if parts[0].ndim == 1 else 1) @ projection


def global_node(triplets: Union[Value, Sequence[Value]]) -> Value:
    """
    Mean of N triplet representations.

    Args:
        triplets: ``[N×D]`` rows or a sequence of ``[D]`` vectors

    Raises:
        ContractError: when N = 0
    """
    if not isinstance(triplets, Value):
        if len(triplets) == 0:
            raise ContractError("global node needs at least one triplet", field="triplets")
        triplets = concat([t.reshape(1, t.shape[-1]) for t in triplets], axis=0)
    if triplets.ndim != 2 or triplets.shape[0] == 0:
        raise ContractError("global node needs at least one triplet", field="triplets", value=triplets.shape)
    return triplets.mean(axis=0)


@dataclass
class SemanticBatch:
    """
    One branch of a scene after encoding.

    Attributes:
        triplets: ``[N×D]`` projected triplet rows S_r
        global_input: ``[D]`` mean node
        contextual: ``[N×D]`` encoded triplet rows S̃_r
        global_output: ``[D]`` s̃_global (encoder output at the global
            position, or the mean of the contextual rows)
        variant: how ``global_output`` was obtained
    """

    triplets: Value
    global_input: Value
    contextual: Value
    global_output: Value
    variant: ScmVariant

    @property
    def num_triplets(self) -> int:
        return int(self.triplets.shape[0])


def encode_context(
    triplets: Value,
    encoder: EncoderParams,
    variant: ScmVariant = ScmVariant.GLOBAL,
) -> SemanticBatch:
    """
    Encode a branch.

    The global variant appends the mean node last, runs the encoder on
    the (N+1)×D stack and splits the last output row off into
    ``global_output``, so ``contextual`` holds the N×D triplet rows. The
    mean variant encodes the N rows alone and averages them.

    Raises:
        ConfigurationError: when D is not divisible by the head count
        ContractError: when there are no triplets
    """
    variant = ScmVariant(variant)
    glob = global_node(triplets)
    n, d = triplets.shape
    if variant == ScmVariant.GLOBAL:
        out = encode(concat([triplets, glob.reshape(1, d)], axis=0), encoder)
        contextual = out[:n]
        global_output = out[n]
    else:
        contextual = encode(triplets, encoder)
        global_output = contextual.mean(axis=0)
    return SemanticBatch(
        triplets=triplets,
        global_input=glob,
        contextual=contextual,
        global_output=global_output,
        variant=variant,
    )


def sc_loss(s_glob: Value, t_glob: Value) -> Value:
    """
    (1/D)·‖s − t‖².

    Raises:
        DimensionError: when shapes differ
    """
    if s_glob.shape != t_glob.shape or s_glob.ndim != 1:
        raise DimensionError(
            "semantic-consistency inputs must be [D] vectors of equal size",
            expected=s_glob.shape,
            actual=t_glob.shape,
        )
    diff = s_glob - t_glob
    return (diff * diff).sum() * (1.0 / s_glob.shape[0])


def context_logits(contextual: Value, params: ScmParams) -> Value:
    """z̃ rows from encoded triplets."""
    return linear(contextual, params.classifier_w, params.classifier_b)


def fuse_logits(z_prime: Value, z_tilde: Value) -> Value:
    """
    z = z' + z̃.

    Raises:
        DimensionError: when shapes differ
    """
    if z_prime.shape != z_tilde.shape:
        raise DimensionError(
            "fused logits must have equal shapes",
            expected=z_prime.shape,
            actual=z_tilde.shape,
        )
    return z_prime + z_tilde
