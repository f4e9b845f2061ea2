"""
============================================================================
SGG-HT - SYNTHETIC SCENE GENERATOR
============================================================================
Long-tailed scene graphs standing in for a real annotated corpus.

Design
------
Predicate frequencies follow a Zipf law p_c ∝ c^(−s), so class 1 is the
most frequent. Each predicate owns a latent prototype: the first
``base_fraction·R`` classes own independent base directions, every
remaining class is its parent's base plus a context perturbation. Head
predicates therefore carry the general features their tail children
specialise, which is what curriculum re-weighting is meant to exploit.

A relation leaves three kinds of evidence:

* both objects' visual features receive the predicate prototype,
* the object box is placed relative to the subject box with the
  predicate's offset and size ratio,
* subject/object labels come from a few preferred label pairs of the
  predicate (this is what the frequency bias picks up).

Relations form a matching (each object is in at most one annotated
relation), so a scene's annotated pairs never conflict. Generation uses
one random stream and is bitwise reproducible for a seed.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from pydantic import ValidationError

from dataset.models import Dataset, GenConfig, SceneInstance
from exceptions import ConfigurationError
from utils.helpers import SeedHelper
from utils.logger import get_logger


logger = get_logger("Generator")

_MIN_SIDE = 0.02


# ============================================================================
# LATENT WORLD
# ============================================================================

@dataclass(frozen=True)
class PredicateWorld:
    """
    Latent structure shared by every scene of one dataset.

    Attributes:
        frequencies: ``[R]`` Zipf target probabilities (class c at c−1)
        prototypes: ``[R×D_v]`` visual prototypes
        geometry: ``[R×3]`` (dx, dy, log size ratio) of object vs subject
        parents: ``[R]`` base class of each predicate (itself for bases)
        label_pairs: ``[R×K×2]`` preferred (subject, object) labels
        appearance: ``[(O+1)×D_v]`` per-object-class visual mean
    """

    frequencies: np.ndarray
    prototypes: np.ndarray
    geometry: np.ndarray
    parents: np.ndarray
    label_pairs: np.ndarray
    appearance: np.ndarray

    @property
    def num_bases(self) -> int:
        return int(np.sum(self.parents == np.arange(1, len(self.parents) + 1)))


def zipf_frequencies(num_classes: int, s: float) -> np.ndarray:
    """Normalized c^(−s) for c = 1..num_classes."""
    ranks = np.arange(1, num_classes + 1, dtype=np.float64)
    weights = ranks ** (-s)
    return weights / weights.sum()


def build_world(cfg: GenConfig, rng: np.random.Generator) -> PredicateWorld:
    """Draw prototypes, geometry and label preferences."""
    R, O, dv = cfg.num_predicate_classes, cfg.num_object_classes, cfg.visual_dim
    num_bases = min(R, max(2, int(round(cfg.base_fraction * R))))

    def unit(v: np.ndarray) -> np.ndarray:
        return v / max(np.linalg.norm(v), 1e-12)

    # unit-scale entries: prototype norm is sqrt(D_v)
    bases = np.stack([unit(rng.standard_normal(dv)) for _ in range(num_bases)]) * np.sqrt(dv)
    prototypes = np.zeros((R, dv))
    geometry = np.zeros((R, 3))
    parents = np.zeros(R, dtype=np.int64)
    for c in range(R):
        if c < num_bases:
            parents[c] = c + 1
            prototypes[c] = bases[c]
            geometry[c] = [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-0.7, 0.7)]
        else:
            parent = int(rng.integers(num_bases))
            parents[c] = parent + 1
            context = unit(rng.standard_normal(dv)) * np.sqrt(dv)
            prototypes[c] = unit(bases[parent] + 0.7 * context) * np.sqrt(dv)
            geometry[c] = geometry[parent] + rng.normal(0.0, 0.3, size=3)

    label_pairs = rng.integers(1, O + 1, size=(R, cfg.label_pairs_per_predicate, 2))
    appearance = rng.standard_normal((O + 1, dv)) * 0.5
    appearance[0] = 0.0

    return PredicateWorld(
        frequencies=zipf_frequencies(R, cfg.zipf_s),
        prototypes=prototypes,
        geometry=geometry,
        parents=parents,
        label_pairs=label_pairs,
        appearance=appearance,
    )


# ============================================================================
# SCENE CONSTRUCTION
# ============================================================================

def _clip_box(cx: float, cy: float, w: float, h: float) -> np.ndarray:
    w = float(np.clip(w, _MIN_SIDE, 0.9))
    h = float(np.clip(h, _MIN_SIDE, 0.9))
    cx = float(np.clip(cx, w / 2, 1.0 - w / 2))
    cy = float(np.clip(cy, h / 2, 1.0 - h / 2))
    return np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])


def _random_box(rng: np.random.Generator) -> np.ndarray:
    w, h = rng.uniform(0.08, 0.3, size=2)
    cx, cy = rng.uniform(0.15, 0.85, size=2)
    return _clip_box(cx, cy, w, h)


def _relation_objects(
    rng: np.random.Generator,
    world: PredicateWorld,
    cfg: GenConfig,
    predicate: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Subject/object boxes, labels and visuals for one relation.

    Returns:
        boxes ``[2×4]``, labels ``[2]``, visuals ``[2×D_v]``
    """
    c = predicate - 1
    k = int(rng.integers(world.label_pairs.shape[1]))
    labels = world.label_pairs[c, k].astype(np.int64)

    w_s, h_s = rng.uniform(0.1, 0.25, size=2)
    cx_s, cy_s = rng.uniform(0.25, 0.75, size=2)
    dx, dy, log_ratio = world.geometry[c] + rng.normal(0.0, 0.1, size=3)
    ratio = float(np.exp(log_ratio))
    subject = _clip_box(cx_s, cy_s, w_s, h_s)
    obj = _clip_box(cx_s + dx * w_s, cy_s + dy * h_s, w_s * ratio, h_s * ratio)

    noise = rng.standard_normal((2, cfg.visual_dim)) * cfg.noise
    visuals = world.appearance[labels] + world.prototypes[c] + noise
    return np.stack([subject, obj]), labels, visuals


def _scene(rng: np.random.Generator, world: PredicateWorld, cfg: GenConfig) -> SceneInstance:
    n = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
    m = int(rng.integers(cfg.relations_min, cfg.relations_max + 1))
    m = min(m, n // 2)
    predicates = rng.choice(np.arange(1, cfg.num_predicate_classes + 1), size=m, p=world.frequencies)
    order = rng.permutation(n)

    boxes = np.zeros((n, 4))
    labels = np.zeros(n, dtype=np.int64)
    visuals = np.zeros((n, cfg.visual_dim))
    relations = np.zeros((m, 3), dtype=np.int64)

    for j, predicate in enumerate(predicates):
        s, o = int(order[2 * j]), int(order[2 * j + 1])
        pair_boxes, pair_labels, pair_visuals = _relation_objects(rng, world, cfg, int(predicate))
        boxes[[s, o]] = pair_boxes
        labels[[s, o]] = pair_labels
        visuals[[s, o]] = pair_visuals
        relations[j] = (s, o, int(predicate))

    for idx in order[2 * m:]:
        idx = int(idx)
        labels[idx] = int(rng.integers(1, cfg.num_object_classes + 1))
        boxes[idx] = _random_box(rng)
        visuals[idx] = world.appearance[labels[idx]] + rng.standard_normal(cfg.visual_dim) * cfg.noise

    return SceneInstance(boxes=boxes, visuals=visuals, labels=labels, relations=relations)


# ============================================================================
# TAIL COVERAGE
# ============================================================================

def tail_classes(cfg: GenConfig) -> List[int]:
    """Bottom half of predicates by target frequency."""
    R = cfg.num_predicate_classes
    return list(range(R - R // 2 + 1, R + 1))


def _ensure_tail_coverage(
    dataset: Dataset,
    world: PredicateWorld,
    rng: np.random.Generator,
) -> int:
    """
    Resample test relations until every tail class has a test instance.

    A donor relation is taken from a predicate holding at least two test
    instances, so coverage already reached is never lost.

    Returns:
        Number of relations resampled
    """
    cfg = dataset.config
    test_idx = dataset.test_indices()
    counts: Dict[int, int] = {}
    for i in test_idx:
        for _, _, p in dataset.scenes[i].triplets():
            counts[p] = counts.get(p, 0) + 1

    missing = [c for c in tail_classes(cfg) if counts.get(c, 0) == 0]
    resampled = 0
    for c in missing:
        donors = [
            (i, j)
            for i in test_idx
            for j, (_, _, p) in enumerate(dataset.scenes[i].triplets())
            if counts.get(p, 0) >= 2
        ]
        if not donors:
            logger.warning(f"Cannot cover tail predicate {c}: no donor relation in the test split")
            continue
        i, j = donors[int(rng.integers(len(donors)))]
        scene = dataset.scenes[i]
        s, o, old = (int(v) for v in scene.relations[j])
        pair_boxes, pair_labels, pair_visuals = _relation_objects(rng, world, cfg, c)

        boxes, labels = scene.boxes.copy(), scene.labels.copy()
        visuals, relations = scene.visuals.copy(), scene.relations.copy()
        boxes[[s, o]] = pair_boxes
        labels[[s, o]] = pair_labels
        visuals[[s, o]] = pair_visuals
        relations[j, 2] = c
        dataset.scenes[i] = SceneInstance(boxes=boxes, visuals=visuals, labels=labels, relations=relations)

        counts[old] -= 1
        counts[c] = 1
        resampled += 1
    return resampled


# ============================================================================
# ENTRY POINT
# ============================================================================

def gen_dataset(cfg: GenConfig) -> Dataset:
    """
    Generate a deterministic long-tailed dataset.

    Args:
        cfg: Generation parameters

    Returns:
        Dataset of ``cfg.num_scenes`` scenes

    Raises:
        ConfigurationError: when ``cfg`` violates its range constraints
    """
    try:
        cfg = GenConfig.model_validate(cfg.model_dump())
    except ValidationError as e:
        raise ConfigurationError(f"invalid generation config: {e.errors()[0]['msg']}", config_key="data.gen", cause=e) from e

    rng = SeedHelper.rng(cfg.seed)
    world = build_world(cfg, rng)
    dataset = Dataset(config=cfg, scenes=[_scene(rng, world, cfg) for _ in range(cfg.num_scenes)])

    if cfg.ensure_tail_coverage and cfg.num_predicate_classes <= 25:
        resampled = _ensure_tail_coverage(dataset, world, rng)
        if resampled:
            logger.info(f"Resampled {resampled} test relation(s) to cover tail predicates")

    logger.info(
        f"Generated {len(dataset)} scenes: R={cfg.num_predicate_classes}, "
        f"O={cfg.num_object_classes}, s={cfg.zipf_s}, seed={cfg.seed}"
    )
    return dataset
