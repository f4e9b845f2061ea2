"""
============================================================================
SGG-HT - PREDICATE PREDICTOR
============================================================================
Forward pass over the candidate pairs of one scene:

    h   = tanh(tanh(f·W1 + b1)·W2 + b2)
    z'  = h·Wc + bc (+ frequency bias)
    p   = softmax(z')                       (feeds the semantic branch)
    z   = z' + z̃                            (z̃ from the encoded triplets)

Training pairs are every annotated pair plus sampled negatives; evaluation
scores every ordered pair.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from autodiff import Value, linear, softmax
from config.constants import BACKGROUND, PredicateEmbedding, RunMode, ScmVariant
from config.settings import RunConfig
from curriculum.losses import crw_loss_pairs
from dataset.models import SceneInstance
from exceptions import ContractError
from model.features import pair_features
from model.params import ModelParams
from semantic.context import context_logits, encode_context, fuse_logits, sc_loss, triplet_semantic
from stats.class_stats import ClassStats
from stats.embeddings import embed_argmax, embed_soft
from utils.logger import get_logger


logger = get_logger("Predictor")


# ============================================================================
# OPTIONS AND RESULTS
# ============================================================================

@dataclass(frozen=True)
class ForwardOptions:
    """Switches of the forward pass."""

    freq_bias: bool = True
    scm_enabled: bool = True
    variant: ScmVariant = ScmVariant.GLOBAL
    predicate_embedding: PredicateEmbedding = PredicateEmbedding.SOFT
    neg_ratio: int = 3
    max_pairs: int = 64

    @classmethod
    def from_config(cls, cfg: RunConfig, mode: RunMode = RunMode.TRAIN) -> "ForwardOptions":
        return cls(
            freq_bias=cfg.model.freq_bias if mode == RunMode.TRAIN else cfg.eval.freq_bias,
            scm_enabled=cfg.scm.enabled,
            variant=cfg.scm.variant,
            predicate_embedding=cfg.scm.predicate_embedding,
            neg_ratio=cfg.model.neg_ratio,
            max_pairs=cfg.model.max_pairs,
        )


@dataclass
class ScenePrediction:
    """
    Per-pair outputs of one scene.

    Attributes:
        pairs: ``[P×2]`` (subject, object) indices
        logits: ``[P×(R+1)]`` fused logits z
        base_logits: ``[P×(R+1)]`` z' (bias included when enabled)
        bias: ``[P×(R+1)]`` frequency-bias part of z' (zeros when off)
        probs: ``[P×(R+1)]`` softmax of z
        skipped: scene had fewer than two objects
    """

    pairs: np.ndarray
    logits: np.ndarray
    base_logits: np.ndarray
    bias: np.ndarray
    probs: np.ndarray
    skipped: bool = False

    @property
    def num_pairs(self) -> int:
        return int(self.pairs.shape[0])

    @classmethod
    def empty(cls, num_classes: int) -> "ScenePrediction":
        blank = np.zeros((0, num_classes))
        return cls(np.zeros((0, 2), dtype=np.int64), blank, blank, blank, blank, skipped=True)


@dataclass
class SceneLoss:
    """Loss terms of one training scene."""

    crw: Value
    sc: Optional[Value]
    num_pairs: int


# ============================================================================
# PAIR SELECTION
# ============================================================================

def training_pairs(
    scene: SceneInstance,
    rng: np.random.Generator,
    neg_ratio: int = 3,
    max_pairs: int = 64,
) -> Tuple[List[Tuple[int, int]], np.ndarray]:
    """
    Annotated pairs (capped at ``max_pairs``) followed by sampled negatives.

    Returns:
        Pairs and their labels (0 for negatives)
    """
    triplets = scene.triplets()[:max_pairs]
    pairs = [(s, o) for s, o, _ in triplets]
    labels = [p for _, _, p in triplets]
    annotated = scene.relation_pairs()
    candidates = [pair for pair in scene.ordered_pairs() if pair not in annotated]
    quota = scene.background_quota(neg_ratio, max_pairs)
    if quota:
        picks = rng.choice(len(candidates), size=quota, replace=False)
        pairs.extend(candidates[i] for i in sorted(picks))
        labels.extend([BACKGROUND] * quota)
    return pairs, np.asarray(labels, dtype=np.int64)


# ============================================================================
# FORWARD PASS
# ============================================================================

def base_logits(
    scene: SceneInstance,
    pairs: Sequence[Tuple[int, int]],
    params: ModelParams,
    use_bias: bool,
) -> Tuple[Value, np.ndarray]:
    """z' for the given pairs and the bias rows that were added."""
    features = Value(pair_features(scene, pairs, params.object_table))
    hidden = linear(features, params.context_w1, params.context_b1).tanh()
    hidden = linear(hidden, params.context_w2, params.context_b2).tanh()
    z = linear(hidden, params.classifier_w, params.classifier_b)

    bias = np.zeros(z.shape)
    if use_bias and params.freq_bias is not None:
        pairs_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        bias = params.freq_bias.lookup_many(
            scene.labels[pairs_arr[:, 0]], scene.labels[pairs_arr[:, 1]]
        )
        z = z + bias
    return z, bias


def _semantic_rows(
    scene: SceneInstance,
    pairs: Sequence[Tuple[int, int]],
    predicate_rows: Value,
    params: ModelParams,
) -> Value:
    pairs_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    s_s = params.object_table.rows[scene.labels[pairs_arr[:, 0]]]
    s_o = params.object_table.rows[scene.labels[pairs_arr[:, 1]]]
    return triplet_semantic(s_s, predicate_rows, s_o, params.scm.projection)


def forward_pairs(
    scene: SceneInstance,
    pairs: Sequence[Tuple[int, int]],
    params: ModelParams,
    options: ForwardOptions,
    labels: Optional[np.ndarray] = None,
    stats: Optional[ClassStats] = None,
    lam: Optional[np.ndarray] = None,
) -> Tuple[Value, Value, np.ndarray, Optional[SceneLoss]]:
    """
    Score fixed pairs; with ``labels`` also build the loss terms.

    Returns:
        fused logits z, base logits z', bias rows, and the scene loss
        (None without labels)
    """
    if len(pairs) == 0:
        raise ContractError("forward pass needs at least one pair", field="pairs")
    z_prime, bias = base_logits(scene, pairs, params, options.freq_bias)
    z = z_prime
    predicted = None

    use_scm = options.scm_enabled and params.scm is not None
    if use_scm:
        p = softmax(z_prime, axis=-1)
        if options.predicate_embedding == PredicateEmbedding.ARGMAX:
            s_p = embed_argmax(p, params.predicate_table)
        else:
            s_p = embed_soft(p, params.predicate_table)
        predicted = encode_context(
            _semantic_rows(scene, pairs, s_p, params), params.scm.encoder, options.variant
        )
        z = fuse_logits(z_prime, context_logits(predicted.contextual, params.scm))

    if labels is None:
        return z, z_prime, bias, None

    weights = stats.weights if stats is not None else np.ones(z.shape[1])
    factors = lam if lam is not None else np.ones(z.shape[1])
    l_crw = crw_loss_pairs(z, labels, weights, factors)

    l_sc = None
    if use_scm and scene.num_relations > 0:
        one_hot = np.zeros(z.shape)
        one_hot[np.arange(len(labels)), labels] = 1.0
        truth = encode_context(
            _semantic_rows(scene, pairs, Value(one_hot @ params.predicate_table.rows), params),
            params.scm.encoder,
            options.variant,
        )
        l_sc = sc_loss(predicted.global_output, truth.global_output)
    return z, z_prime, bias, SceneLoss(crw=l_crw, sc=l_sc, num_pairs=len(pairs))


def forward_scene(
    scene: SceneInstance,
    params: ModelParams,
    stats: Optional[ClassStats],
    mode: RunMode,
    options: ForwardOptions,
    lam: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[ScenePrediction, Optional[SceneLoss]]:
    """
    Predict a scene's predicates.

    Args:
        scene: Scene instance
        params: Model parameters
        stats: Class statistics (weights used in train mode)
        mode: train samples pairs and returns losses; eval scores every
            ordered pair
        options: Forward switches
        lam: Curriculum factors (train mode)
        rng: Negative-pair sampler (train mode)

    Returns:
        ScenePrediction and, in train mode, the SceneLoss
    """
    mode = RunMode(mode)
    num_classes = params.dims.num_classes
    if scene.num_objects < 2:
        logger.warning(f"Skipping scene with {scene.num_objects} object(s)")
        return ScenePrediction.empty(num_classes), None

    if mode == RunMode.TRAIN:
        if rng is None:
            raise ContractError("train mode needs a sampling generator", field="rng")
        pairs, labels = training_pairs(scene, rng, options.neg_ratio, options.max_pairs)
        z, z_prime, bias, loss = forward_pairs(scene, pairs, params, options, labels, stats, lam)
    else:
        pairs = scene.ordered_pairs()
        z, z_prime, bias, loss = forward_pairs(scene, pairs, params, options)

    prediction = ScenePrediction(
        pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
        logits=z.numpy(),
        base_logits=z_prime.numpy(),
        bias=np.asarray(bias, dtype=np.float64),
        probs=softmax(z.detach(), axis=-1).numpy(),
    )
    return prediction, loss


# ============================================================================
# OBJECTIVE
# ============================================================================

def total_loss(l_crw: Value, l_sc: Optional[Value], scm_enabled: bool) -> Value:
    """L_CRW + L_SC; exactly L_CRW when the semantic module is off."""
    if not scm_enabled or l_sc is None:
        return l_crw
    return l_crw + l_sc


@dataclass
class BatchObjective:
    """Reduced loss of one optimizer step."""

    total: Value
    crw: Value
    sc: Optional[Value]
    scenes: int
    sc_scenes: int


def batch_objective(
    scenes: Sequence[SceneInstance],
    params: ModelParams,
    stats: ClassStats,
    options: ForwardOptions,
    lam: np.ndarray,
    rng: np.random.Generator,
) -> BatchObjective:
    """
    Mean re-weighted loss over scenes plus the semantic-consistency loss
    averaged over the scenes that have one.

    Raises:
        ContractError: when no scene in the batch can be scored
    """
    crw_terms: List[Value] = []
    sc_terms: List[Value] = []
    for scene in scenes:
        _, loss = forward_scene(scene, params, stats, RunMode.TRAIN, options, lam, rng)
        if loss is None:
            continue
        crw_terms.append(loss.crw)
        if loss.sc is not None:
            sc_terms.append(loss.sc)
    if not crw_terms:
        raise ContractError("batch has no scene with at least two objects", field="scenes")

    l_crw = crw_terms[0]
    for term in crw_terms[1:]:
        l_crw = l_crw + term
    l_crw = l_crw * (1.0 / len(crw_terms))

    l_sc = None
    if sc_terms:
        l_sc = sc_terms[0]
        for term in sc_terms[1:]:
            l_sc = l_sc + term
        l_sc = l_sc * (1.0 / len(sc_terms))

    return BatchObjective(
        total=total_loss(l_crw, l_sc, options.scm_enabled),
        crw=l_crw,
        sc=l_sc,
        scenes=len(crw_terms),
        sc_scenes=len(sc_terms),
    )
