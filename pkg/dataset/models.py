"""
============================================================================
SGG-HT - DATASET MODELS
============================================================================
Generation config, scene records and the dataset container.

This module depends only on pydantic, numpy and the exceptions package
so that the config layer can import GenConfig without cycles.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.helpers import HashHelper


# ============================================================================
# GENERATION CONFIG
# ============================================================================

class GenConfig(BaseModel):
    """
    Parameters of the synthetic long-tailed scene generator.

    Attributes:
        num_scenes: Scenes to generate
        objects_min / objects_max: Objects per scene (inclusive)
        num_object_classes: O
        num_predicate_classes: R (background excluded)
        zipf_s: Exponent of the predicate frequency law
        relations_min / relations_max: Annotated relations per scene
        seed: Generator seed (also fixes the train/test split)
        visual_dim: D_v
        noise: Visual noise std per dimension, relative to unit-scale
            prototype entries
        base_fraction: Share of predicates that own a base prototype
        label_pairs_per_predicate: Preferred (subject, object) label pairs
        ensure_tail_coverage: Give every tail class a test instance
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_scenes: int = Field(default=2000, ge=1)
    objects_min: int = Field(default=4, ge=2)
    objects_max: int = Field(default=8, ge=2)
    num_object_classes: int = Field(default=15, ge=2)
    num_predicate_classes: int = Field(default=20, ge=2)
    zipf_s: float = Field(default=1.5, gt=0.0)
    relations_min: int = Field(default=1, ge=0)
    relations_max: int = Field(default=4, ge=1)
    seed: int = Field(default=7, ge=0)
    visual_dim: int = Field(default=32, ge=1)
    noise: float = Field(default=0.3, ge=0.0)
    base_fraction: float = Field(default=0.25, gt=0.0, le=1.0)
    label_pairs_per_predicate: int = Field(default=3, ge=1)
    ensure_tail_coverage: bool = True

    @model_validator(mode="after")
    def validate_ranges(self) -> "GenConfig":
        """Ranges must be non-empty and relations must fit the objects."""
        if self.objects_min > self.objects_max:
            raise ValueError(
                f"objects range is empty: min={self.objects_min} > max={self.objects_max}"
            )
        if self.relations_min > self.relations_max:
            raise ValueError(
                f"relations range is empty: min={self.relations_min} > max={self.relations_max}"
            )
        if self.relations_min > self.objects_min // 2:
            raise ValueError(
                "relations_min exceeds what the smallest scene can hold "
                f"({self.objects_min // 2} disjoint pairs)"
            )
        return self


# ============================================================================
# SCENE
# ============================================================================

@dataclass(frozen=True)
class SceneInstance:
    """
    One image's object proposals and ground-truth relations.

    Attributes:
        boxes: ``[n×4]`` (x1, y1, x2, y2) in [0, 1]
        visuals: ``[n×D_v]`` visual features
        labels: ``[n]`` object class ids in 1..O
        relations: ``[m×3]`` (subject idx, object idx, predicate id in 1..R)
    """

    boxes: np.ndarray
    visuals: np.ndarray
    labels: np.ndarray
    relations: np.ndarray

    @property
    def num_objects(self) -> int:
        return int(self.labels.shape[0])

    @property
    def num_relations(self) -> int:
        return int(self.relations.shape[0])

    @property
    def visual_dim(self) -> int:
        return int(self.visuals.shape[1])

    def relation_pairs(self) -> Set[Tuple[int, int]]:
        """Annotated ordered (subject, object) pairs."""
        return {(int(s), int(o)) for s, o, _ in self.relations}

    def triplets(self) -> List[Tuple[int, int, int]]:
        """Annotated (subject, object, predicate) triplets."""
        return [(int(s), int(o), int(p)) for s, o, p in self.relations]

    def ordered_pairs(self) -> List[Tuple[int, int]]:
        """All n·(n−1) ordered pairs, subject-major."""
        n = self.num_objects
        return [(s, o) for s in range(n) for o in range(n) if s != o]

    def background_quota(self, neg_ratio: int = 3, max_pairs: int = 64) -> int:
        """
        Negatives drawn for this scene during training.

        min(neg_ratio·max(m, 1), max_pairs − m, n(n−1) − m), at least 0.
        """
        m = min(self.num_relations, max_pairs)
        available = self.num_objects * (self.num_objects - 1) - self.num_relations
        return max(0, min(neg_ratio * max(m, 1), max_pairs - m, available))

    def same_as(self, other: "SceneInstance") -> bool:
        """Bitwise equality of every array."""
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in (
                (self.boxes, other.boxes),
                (self.visuals, other.visuals),
                (self.labels, other.labels),
                (self.relations, other.relations),
            )
        )


# ============================================================================
# DATASET
# ============================================================================

@dataclass
class Dataset:
    """
    Scene collection plus the config that produced it.

    The 80/20 split assigns scene i to test when the hash bucket of
    (seed, i) is 0, so it is stable across runs and disjoint.
    """

    config: GenConfig
    scenes: List[SceneInstance] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self) -> Iterator[SceneInstance]:
        return iter(self.scenes)

    @property
    def num_predicate_classes(self) -> int:
        return self.config.num_predicate_classes

    @property
    def num_classes(self) -> int:
        """R + 1 (background included)."""
        return self.config.num_predicate_classes + 1

    def is_test(self, index: int) -> bool:
        return HashHelper.split_bucket(self.config.seed, index) == 0

    def train_indices(self) -> List[int]:
        return [i for i in range(len(self.scenes)) if not self.is_test(i)]

    def test_indices(self) -> List[int]:
        return [i for i in range(len(self.scenes)) if self.is_test(i)]

    def subset(self, indices: Sequence[int]) -> List[SceneInstance]:
        return [self.scenes[i] for i in indices]

    def train_scenes(self) -> List[SceneInstance]:
        return self.subset(self.train_indices())

    def test_scenes(self) -> List[SceneInstance]:
        return self.subset(self.test_indices())

    def concatenated(self, other: "Dataset") -> "Dataset":
        """Scenes of both datasets, this one first."""
        return Dataset(config=self.config, scenes=[*self.scenes, *other.scenes])

    def same_as(self, other: "Dataset") -> bool:
        """Bitwise equality of config and every scene."""
        return (
            self.config == other.config
            and len(self.scenes) == len(other.scenes)
            and all(a.same_as(b) for a, b in zip(self.scenes, other.scenes))
        )
