"""
============================================================================
SGG-HT - FREQUENCY BIAS
============================================================================
Log-prior of the predicate given the (subject label, object label) pair,
with Laplace smoothing:

    bias[c] = log((count(pair, c) + ε) / (count(pair, ·) + ε·(R+1)))

Unseen pairs fall back to the uniform log(1/(R+1)).
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from config.constants import BACKGROUND
from dataset.models import SceneInstance
from exceptions import ConfigurationError, DimensionError


LabelPair = Tuple[int, int]


@dataclass(frozen=True)
class FrequencyBias:
    """
    Smoothed log-distributions keyed by label pair.

    Attributes:
        table: observed pair -> ``[R+1]`` log-probabilities
        num_classes: R+1
    """

    table: Dict[LabelPair, np.ndarray]
    num_classes: int
    _uniform: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        uniform = np.full(self.num_classes, np.log(1.0 / self.num_classes))
        uniform.flags.writeable = False
        object.__setattr__(self, "_uniform", uniform)
        for vec in self.table.values():
            vec.flags.writeable = False

    def lookup(self, subject_label: int, object_label: int) -> np.ndarray:
        """Bias vector of a pair (uniform when unseen)."""
        return self.table.get((int(subject_label), int(object_label)), self._uniform)

    def lookup_many(self, subject_labels: Sequence[int], object_labels: Sequence[int]) -> np.ndarray:
        """``[P×(R+1)]`` bias rows for P pairs."""
        if len(subject_labels) == 0:
            return np.zeros((0, self.num_classes))
        return np.stack([self.lookup(s, o) for s, o in zip(subject_labels, object_labels)])

    def dense(self, num_object_classes: int) -> np.ndarray:
        """
        ``[(O+1)×(O+1)×(R+1)]`` array with unseen pairs at the uniform
        vector, for checkpoints.
        """
        out = np.broadcast_to(
            self._uniform, (num_object_classes + 1, num_object_classes + 1, self.num_classes)
        ).copy()
        for (s, o), vec in self.table.items():
            out[s, o] = vec
        return out

    @classmethod
    def from_dense(cls, array: np.ndarray, observed: np.ndarray) -> "FrequencyBias":
        """
        Rebuild from ``dense`` output.

        Args:
            array: ``[(O+1)×(O+1)×(R+1)]`` log-probabilities
            observed: ``[(O+1)×(O+1)]`` mask of stored pairs
        """
        if array.ndim != 3 or observed.shape != array.shape[:2]:
            raise DimensionError(
                "frequency bias arrays have inconsistent shapes",
                actual=[array.shape, observed.shape],
            )
        table = {
            (int(s), int(o)): array[s, o].copy()
            for s, o in zip(*np.nonzero(observed))
        }
        return cls(table=table, num_classes=int(array.shape[2]))

    def observed_mask(self, num_object_classes: int) -> np.ndarray:
        mask = np.zeros((num_object_classes + 1, num_object_classes + 1))
        for s, o in self.table:
            mask[s, o] = 1.0
        return mask


def build_frequency_bias(
    scenes: Sequence[SceneInstance],
    num_predicate_classes: int,
    smoothing: float = 1e-3,
    include_background: bool = True,
) -> FrequencyBias:
    """
    Count predicates per label pair over training scenes.

    Args:
        scenes: Training scenes
        num_predicate_classes: R
        smoothing: Laplace ε
        include_background: count every unannotated ordered pair as
            background for its label pair

    Returns:
        FrequencyBias

    Raises:
        ConfigurationError: when smoothing ≤ 0
    """
    if smoothing <= 0:
        raise ConfigurationError(
            f"frequency smoothing must be positive, got {smoothing}",
            config_key="model.freq_smoothing",
        )
    num_classes = num_predicate_classes + 1
    counts: Dict[LabelPair, np.ndarray] = {}

    def bump(pair: LabelPair, predicate: int) -> None:
        row = counts.get(pair)
        if row is None:
            row = counts[pair] = np.zeros(num_classes)
        row[predicate] += 1.0

    for scene in scenes:
        labels = scene.labels
        annotated = {}
        for s, o, p in scene.triplets():
            annotated[(s, o)] = p
            bump((int(labels[s]), int(labels[o])), p)
        if include_background:
            for s, o in scene.ordered_pairs():
                if (s, o) not in annotated:
                    bump((int(labels[s]), int(labels[o])), BACKGROUND)

    table = {
        pair: np.log((row + smoothing) / (row.sum() + smoothing * num_classes))
        for pair, row in counts.items()
    }
    return FrequencyBias(table=table, num_classes=num_classes)
