"""
============================================================================
SGG-HT - MODEL PARAMETERS
============================================================================
Trainable weights of the predicate classifier and semantic context
module, plus the frozen tables the forward pass reads.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from autodiff import Value
from autodiff.init import xavier_uniform, zeros
from config.settings import RunConfig
from model.features import pair_feature_dim
from semantic.context import ScmParams, init_scm
from stats.embeddings import EmbeddingTable, build_tables
from stats.frequency import FrequencyBias
from utils.helpers import SeedHelper
from utils.logger import get_logger


logger = get_logger("ModelParams")


@dataclass(frozen=True)
class ModelDims:
    """Sizes fixing every parameter shape."""

    num_object_classes: int
    num_predicate_classes: int
    visual_dim: int
    hidden_dim: int

    @property
    def num_classes(self) -> int:
        return self.num_predicate_classes + 1

    @property
    def feature_dim(self) -> int:
        return pair_feature_dim(self.visual_dim)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "ModelDims":
        gen = cfg.data.gen
        return cls(
            num_object_classes=gen.num_object_classes,
            num_predicate_classes=gen.num_predicate_classes,
            visual_dim=gen.visual_dim,
            hidden_dim=cfg.model.hidden_dim,
        )


@dataclass
class ModelParams:
    """
    Weights of one model.

    Attributes:
        dims: shape-determining sizes
        context_w1 / context_b1: pair feature -> hidden
        context_w2 / context_b2: hidden -> hidden
        classifier_w / classifier_b: hidden -> R+1 (z')
        scm: semantic context parameters, absent when the module is off
        object_table / predicate_table: frozen 200-d embeddings
        freq_bias: label-pair prior, absent until built
        class_counts: training-split counts the weights were derived from
    """

    dims: ModelDims
    context_w1: Value
    context_b1: Value
    context_w2: Value
    context_b2: Value
    classifier_w: Value
    classifier_b: Value
    scm: Optional[ScmParams]
    object_table: EmbeddingTable
    predicate_table: EmbeddingTable
    freq_bias: Optional[FrequencyBias] = None
    class_counts: Optional[np.ndarray] = None

    def named(self) -> Dict[str, Value]:
        """Trainable parameters by name, in a fixed order."""
        out = {
            "context.w1": self.context_w1,
            "context.b1": self.context_b1,
            "context.w2": self.context_w2,
            "context.b2": self.context_b2,
            "classifier.w": self.classifier_w,
            "classifier.b": self.classifier_b,
        }
        if self.scm is not None:
            out.update(self.scm.named())
        return out

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.named().values()))

    def zero_grad(self) -> None:
        for p in self.named().values():
            p.zero_grad()


def init_params(
    cfg: RunConfig,
    freq_bias: Optional[FrequencyBias] = None,
    class_counts: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> ModelParams:
    """
    Xavier-initialized parameters for a run configuration.

    Args:
        cfg: Run configuration
        freq_bias: Prior table, if already built
        class_counts: Training counts, if already computed
        seed: Initialization seed (defaults to the run seed)

    Returns:
        ModelParams
    """
    dims = ModelDims.from_config(cfg)
    rng = SeedHelper.rng(SeedHelper.derive(cfg.seed if seed is None else seed, "init"))
    scale = cfg.model.init_scale
    object_table, predicate_table = build_tables(
        dims.num_object_classes,
        dims.num_predicate_classes,
        cfg.model.embedding_seed,
        cfg.model.embedding_path,
    )

    params = ModelParams(
        dims=dims,
        context_w1=xavier_uniform(rng, dims.feature_dim, dims.hidden_dim, "context.w1", scale),
        context_b1=zeros(dims.hidden_dim, "context.b1"),
        context_w2=xavier_uniform(rng, dims.hidden_dim, dims.hidden_dim, "context.w2", scale),
        context_b2=zeros(dims.hidden_dim, "context.b2"),
        classifier_w=xavier_uniform(rng, dims.hidden_dim, dims.num_classes, "classifier.w", scale),
        classifier_b=zeros(dims.num_classes, "classifier.b"),
        scm=(
            init_scm(
                rng,
                cfg.scm.d_model,
                dims.num_classes,
                cfg.scm.layers,
                cfg.scm.heads,
                cfg.scm.ff_mult,
                scale,
            )
            if cfg.scm.enabled
            else None
        ),
        object_table=object_table,
        predicate_table=predicate_table,
        freq_bias=freq_bias,
        class_counts=class_counts,
    )
    logger.info(
        f"Model initialized: {params.parameter_count()} trainable parameters "
        f"(feature {dims.feature_dim}, hidden {dims.hidden_dim}, "
        f"scm {'on, D=' + str(cfg.scm.d_model) if cfg.scm.enabled else 'off'})"
    )
    return params
