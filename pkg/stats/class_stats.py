"""
============================================================================
SGG-HT - CLASS STATISTICS
============================================================================
Predicate counts over the training split, class-balanced weights and the
head set used by curriculum re-weighting.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import FrozenSet, Iterable, Optional, Sequence, Union

import numpy as np

from config.constants import BACKGROUND, Weighting
from dataset.models import Dataset, SceneInstance
from exceptions import ConfigurationError, DataError
from utils.logger import get_logger


logger = get_logger("ClassStats")


@dataclass(frozen=True)
class ClassStats:
    """
    Per-class statistics of the training split.

    Attributes:
        counts: ``[R+1]`` instance counts, index 0 = sampled negatives
        weights: ``[R+1]`` loss weights (all 1 until computed)
        head_set: head class indices, background always included
        total: sum of counts
    """

    counts: np.ndarray
    weights: np.ndarray
    head_set: FrozenSet[int]
    total: int

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    def is_head(self, class_id: int) -> bool:
        return class_id in self.head_set

    def tail_set(self) -> FrozenSet[int]:
        """Classes outside the head set."""
        return frozenset(range(self.num_classes)) - self.head_set

    def with_curriculum(
        self,
        beta: float,
        rho: float,
        weighting: Weighting = Weighting.CLASS_BALANCED,
    ) -> "ClassStats":
        """
        Copy with weights and head set filled in.

        Args:
            beta: effective-number β
            rho: head-set cumulative mass
            weighting: class-balanced or uniform weights
        """
        if weighting == Weighting.UNIFORM:
            weights = np.ones(self.num_classes)
        else:
            weights = class_balanced_weights(self.counts, beta)
        return replace(self, weights=weights, head_set=select_head_set(self.counts, rho))


# ============================================================================
# COUNTING
# ============================================================================

def count_predicates(
    dataset: Union[Dataset, Sequence[SceneInstance]],
    num_predicate_classes: Optional[int] = None,
    neg_ratio: int = 3,
    max_pairs: int = 64,
) -> ClassStats:
    """
    Count predicate instances.

    A Dataset contributes its training split; a plain scene sequence is
    counted as given. The background count is the number of negatives
    the pair sampler draws, which is fixed per scene.

    Args:
        dataset: Dataset or scenes
        num_predicate_classes: R (taken from the dataset config when omitted)
        neg_ratio: negatives per annotated pair
        max_pairs: training pair cap per scene

    Returns:
        ClassStats with unit weights and head set {0}

    Raises:
        DataError: when there is nothing to count
    """
    if isinstance(dataset, Dataset):
        scenes: Sequence[SceneInstance] = dataset.train_scenes()
        num_predicate_classes = num_predicate_classes or dataset.num_predicate_classes
    else:
        scenes = dataset
    if num_predicate_classes is None:
        raise ConfigurationError("num_predicate_classes is required for a scene list")
    if not scenes:
        raise DataError("cannot count predicates of an empty dataset")

    counts = np.zeros(num_predicate_classes + 1, dtype=np.int64)
    for scene in scenes:
        if scene.num_relations:
            counts += np.bincount(scene.relations[:, 2], minlength=num_predicate_classes + 1)
        counts[BACKGROUND] += scene.background_quota(neg_ratio, max_pairs)

    total = int(counts.sum())
    if total <= 0:
        raise DataError("dataset contains no relations and no negative pairs")
    return ClassStats(
        counts=counts,
        weights=np.ones(num_predicate_classes + 1),
        head_set=frozenset({BACKGROUND}),
        total=total,
    )


# ============================================================================
# WEIGHTS AND HEAD SET
# ============================================================================

def class_balanced_weights(counts: Iterable[int], beta: float) -> np.ndarray:
    """
    Effective-number weights (1−β)/(1−β^n), mean-normalized over classes
    with a positive count. Classes with count 0 keep weight 1.

    Raises:
        ConfigurationError: when β is outside [0, 1)
    """
    if not 0.0 <= beta < 1.0:
        raise ConfigurationError(f"beta must lie in [0, 1), got {beta}", config_key="crm.beta")
    n = np.asarray(counts, dtype=np.float64)
    present = n > 0
    weights = np.ones_like(n)
    if not np.any(present):
        return weights

    if beta == 0.0:
        raw = np.ones(int(present.sum()))
    else:
        # 1 − β^n = −expm1(n·log β), accurate for β close to 1
        raw = (1.0 - beta) / -np.expm1(n[present] * np.log(beta))
    weights[present] = raw / raw.mean()
    return weights


def select_head_set(counts: Iterable[int], rho: float) -> FrozenSet[int]:
    """
    Smallest count-sorted prefix of predicate classes holding at least a
    ρ share of the non-background total, plus background.

    Ties go to the smaller class index. ρ = 1 takes every class, including
    classes with no training instances.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if rho >= 1.0:
        return frozenset(range(len(counts)))
    head = {BACKGROUND}
    total = int(counts[1:].sum())
    if total == 0:
        return frozenset(head)

    order = sorted(range(1, len(counts)), key=lambda c: (-int(counts[c]), c))
    cumulative = 0
    for c in order:
        if cumulative / total >= rho:
            break
        head.add(c)
        cumulative += int(counts[c])
    return frozenset(head)


def build_class_stats(
    dataset: Union[Dataset, Sequence[SceneInstance]],
    num_predicate_classes: Optional[int],
    beta: float,
    rho: float,
    weighting: Weighting = Weighting.CLASS_BALANCED,
    neg_ratio: int = 3,
    max_pairs: int = 64,
) -> ClassStats:
    """Counts, weights and head set in one call."""
    stats = count_predicates(dataset, num_predicate_classes, neg_ratio, max_pairs)
    stats = stats.with_curriculum(beta, rho, weighting)
    logger.info(
        f"Class stats: total={stats.total}, background={int(stats.counts[BACKGROUND])}, "
        f"head={sorted(stats.head_set)}, weighting={Weighting(weighting).value}"
    )
    return stats
