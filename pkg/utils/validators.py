"""
============================================================================
SGG-HT - VALIDATORS UTILITY
============================================================================
Validation functions for arrays, probability vectors and scene records.
============================================================================
"""

from __future__ import annotations

from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np

from exceptions import ContractError, DataError, DimensionError

if TYPE_CHECKING:
    from dataset.models import SceneInstance


# ============================================================================
# ARRAY VALIDATORS
# ============================================================================

class ArrayValidator:
    """
    Shape and value checks for numpy arrays.
    """

    @staticmethod
    def require_shape(array: np.ndarray, shape: Sequence[Optional[int]], name: str = "array") -> None:
        """
        Check rank and every fixed dimension (``None`` matches anything).

        Raises:
            DimensionError: on mismatch
        """
        if array.ndim != len(shape) or any(
            want is not None and got != want for got, want in zip(array.shape, shape)
        ):
            raise DimensionError(
                f"{name} has shape {array.shape}, expected {tuple(shape)}",
                expected=[-1 if s is None else s for s in shape],
                actual=array.shape,
                field=name,
            )

    @staticmethod
    def require_probabilities(prob: np.ndarray, tol: float = 1e-6, name: str = "prob") -> None:
        """
        Check non-negative entries summing to 1 along the last axis.

        Raises:
            ContractError: when the vector is not a distribution
        """
        if np.any(prob < -1e-12):
            raise ContractError(f"{name} has negative entries", field=name)
        sums = prob.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > tol):
            worst = float(sums.flat[np.argmax(np.abs(sums - 1.0))])
            raise ContractError(f"{name} sums to {worst}, not 1", field=name, value=worst)

    @staticmethod
    def require_one_hot(y: np.ndarray, name: str = "y") -> int:
        """
        Check a one-hot vector and return its hot index.

        Raises:
            ContractError: when ``y`` is not one-hot
        """
        if y.ndim != 1 or not np.all((y == 0.0) | (y == 1.0)) or int(y.sum()) != 1:
            raise ContractError(f"{name} is not a one-hot vector", field=name, value=y)
        return int(np.argmax(y))


# ============================================================================
# SCENE VALIDATORS
# ============================================================================

class SceneValidator:
    """
    Invariant checks for SceneInstance records.
    """

    @staticmethod
    def problems(
        scene: "SceneInstance",
        num_object_classes: int,
        num_predicate_classes: int,
        visual_dim: Optional[int] = None,
    ) -> List[str]:
        """
        List every violated invariant (empty when the scene is valid).

        Args:
            scene: Scene to check
            num_object_classes: O
            num_predicate_classes: R
            visual_dim: expected D_v, if known

        Returns:
            Human-readable problem descriptions
        """
        found: List[str] = []
        n = scene.labels.shape[0]

        if scene.boxes.shape != (n, 4):
            found.append(f"boxes shape {scene.boxes.shape} != ({n}, 4)")
        else:
            b = scene.boxes
            if np.any(b < 0.0) or np.any(b > 1.0):
                found.append("box coordinates outside [0, 1]")
            if np.any(b[:, 0] >= b[:, 2]) or np.any(b[:, 1] >= b[:, 3]):
                found.append("degenerate box (x1 >= x2 or y1 >= y2)")

        if scene.visuals.ndim != 2 or scene.visuals.shape[0] != n:
            found.append(f"visuals shape {scene.visuals.shape} inconsistent with {n} objects")
        elif visual_dim is not None and scene.visuals.shape[1] != visual_dim:
            found.append(f"visual dim {scene.visuals.shape[1]} != {visual_dim}")
        elif not np.all(np.isfinite(scene.visuals)):
            found.append("non-finite visual features")

        if np.any(scene.labels < 1) or np.any(scene.labels > num_object_classes):
            found.append("object label outside 1..O")

        rel = scene.relations
        if rel.ndim != 2 or rel.shape[1] != 3:
            found.append(f"relations shape {rel.shape} is not [m, 3]")
            return found
        if rel.shape[0]:
            if np.any(rel[:, 0] == rel[:, 1]):
                found.append("relation with subject == object")
            if np.any(rel[:, :2] < 0) or np.any(rel[:, :2] >= n):
                found.append("relation references a missing object")
            if np.any(rel[:, 2] < 1) or np.any(rel[:, 2] > num_predicate_classes):
                found.append("predicate id outside 1..R")
            pairs = {(int(s), int(o)) for s, o, _ in rel}
            if len(pairs) != rel.shape[0]:
                found.append("duplicate annotated (subject, object) pair")
        return found

    @staticmethod
    def validate(
        scene: "SceneInstance",
        num_object_classes: int,
        num_predicate_classes: int,
        visual_dim: Optional[int] = None,
        scene_index: Optional[int] = None,
    ) -> None:
        """
        Raise on the first invalid scene.

        Raises:
            DataError: listing every violated invariant
        """
        found = SceneValidator.problems(scene, num_object_classes, num_predicate_classes, visual_dim)
        if found:
            raise DataError(
                f"scene {scene_index} violates invariants: {'; '.join(found)}",
                details={"scene_index": scene_index, "problems": found},
            )


# ============================================================================
# END OF VALIDATORS MODULE
# ============================================================================
