"""
============================================================================
SGG-HT - TRIPLET MATCHING
============================================================================
Ranked triplet lists and PredCls recall: a predicted triplet matches a
ground-truth triplet when subject index, object index and predicate are
all equal. Background never appears on either side.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Set, Tuple

import numpy as np

from config.constants import BACKGROUND
from exceptions import ContractError, MetricError


Triplet = Tuple[int, int, int]


@dataclass
class RankedTriplets:
    """
    One scene's predictions, best first.

    Attributes:
        entries: (subject, object, predicate, score) rows sorted by score
            descending, then pair index, then predicate
        graph_constraint: at most one entry per ordered pair
    """

    entries: List[Tuple[int, int, int, float]] = field(default_factory=list)
    graph_constraint: bool = True

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, k: int) -> Set[Triplet]:
        """Triplets among the first ``k`` entries."""
        return {(s, o, p) for s, o, p, _ in self.entries[:k]}


def rank_triplets(pairs: np.ndarray, probs: np.ndarray, graph_constraint: bool = True) -> RankedTriplets:
    """
    Rank a scene's scored pairs.

    Args:
        pairs: ``[P×2]`` subject/object indices, in pair-index order
        probs: ``[P×(R+1)]`` predicate probabilities
        graph_constraint: keep only each pair's best non-background
            predicate (ties to the smaller id)

    Returns:
        RankedTriplets
    """
    keyed = []
    for i, ((s, o), row) in enumerate(zip(pairs, probs)):
        if graph_constraint:
            c = int(np.argmax(row[1:])) + 1
            keyed.append((-float(row[c]), i, c, int(s), int(o), float(row[c])))
        else:
            for c in range(1, row.shape[0]):
                keyed.append((-float(row[c]), i, c, int(s), int(o), float(row[c])))
    keyed.sort(key=lambda item: item[:3])
    return RankedTriplets(
        entries=[(s, o, c, score) for _, _, c, s, o, score in keyed],
        graph_constraint=graph_constraint,
    )


def _ground_truth_sets(gt: Sequence[Sequence[Triplet]]) -> List[Set[Triplet]]:
    return [{(int(s), int(o), int(p)) for s, o, p in scene if int(p) != BACKGROUND} for scene in gt]


def _check(predictions: Sequence[RankedTriplets], gt: Sequence[Sequence[Triplet]], k: int) -> None:
    if k < 1:
        raise ContractError(f"k must be at least 1, got {k}", field="k", value=k)
    if len(predictions) != len(gt):
        raise ContractError(
            f"{len(predictions)} prediction lists for {len(gt)} ground-truth scenes",
            field="predictions",
        )


def recall_at_k(predictions: Sequence[RankedTriplets], gt: Sequence[Sequence[Triplet]], k: int) -> float:
    """
    Per-scene share of ground-truth triplets found in the top ``k``,
    averaged over scenes with at least one ground-truth triplet.

    Raises:
        MetricError: when no scene has ground truth
    """
    _check(predictions, gt, k)
    recalls = []
    for ranked, truth in zip(predictions, _ground_truth_sets(gt)):
        if truth:
            recalls.append(len(truth & ranked.top(k)) / len(truth))
    if not recalls:
        raise MetricError("no scene carries a ground-truth triplet")
    return float(np.mean(recalls))


def per_class_hits(
    predictions: Sequence[RankedTriplets],
    gt: Sequence[Sequence[Triplet]],
    k: int,
    num_classes: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Pooled ``[R+1]`` hit and ground-truth counts at ``k``."""
    _check(predictions, gt, k)
    hits = np.zeros(num_classes, dtype=np.int64)
    totals = np.zeros(num_classes, dtype=np.int64)
    for ranked, truth in zip(predictions, _ground_truth_sets(gt)):
        top = ranked.top(k)
        for triplet in truth:
            totals[triplet[2]] += 1
            if triplet in top:
                hits[triplet[2]] += 1
    return hits, totals


def mean_recall_at_k(
    predictions: Sequence[RankedTriplets],
    gt: Sequence[Sequence[Triplet]],
    k: int,
    num_classes: int,
) -> Tuple[float, np.ndarray]:
    """
    Class-pooled recall averaged over predicate classes with ground truth.

    Returns:
        mR@k and the ``[R+1]`` per-class recall (NaN where a class has
        no ground truth; index 0 is always NaN)

    Raises:
        MetricError: when no scene has ground truth
    """
    hits, totals = per_class_hits(predictions, gt, k, num_classes)
    present = totals > 0
    present[BACKGROUND] = False
    if not np.any(present):
        raise MetricError("no scene carries a ground-truth triplet")
    per_class = np.full(num_classes, np.nan)
    per_class[present] = hits[present] / totals[present]
    return float(np.mean(per_class[present])), per_class
