"""
============================================================================
SGG-HT - PAIR FEATURES
============================================================================
Feature vector of an ordered (subject, object) pair:

    b_s [4] | b_o [4] | relative [8] | v_s [D_v] | v_o [D_v] | e_s [200] | e_o [200]

Relative encoding: center offsets scaled by the subject size, log width
and height ratios, IoU, and the union box area, width and height.
============================================================================
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from config.constants import BOX_DIM, EMBEDDING_DIM, RELATIVE_SPATIAL_DIM
from dataset.models import SceneInstance
from stats.embeddings import EmbeddingTable


def pair_feature_dim(visual_dim: int) -> int:
    """Total width of a pair feature."""
    return 2 * BOX_DIM + RELATIVE_SPATIAL_DIM + 2 * visual_dim + 2 * EMBEDDING_DIM


def relative_spatial(subject_boxes: np.ndarray, object_boxes: np.ndarray) -> np.ndarray:
    """``[P×8]`` relative encoding of box pairs."""
    sw = subject_boxes[:, 2] - subject_boxes[:, 0]
    sh = subject_boxes[:, 3] - subject_boxes[:, 1]
    ow = object_boxes[:, 2] - object_boxes[:, 0]
    oh = object_boxes[:, 3] - object_boxes[:, 1]
    scx = (subject_boxes[:, 0] + subject_boxes[:, 2]) / 2
    scy = (subject_boxes[:, 1] + subject_boxes[:, 3]) / 2
    ocx = (object_boxes[:, 0] + object_boxes[:, 2]) / 2
    ocy = (object_boxes[:, 1] + object_boxes[:, 3]) / 2

    ix = np.clip(np.minimum(subject_boxes[:, 2], object_boxes[:, 2]) - np.maximum(subject_boxes[:, 0], object_boxes[:, 0]), 0, None)
    iy = np.clip(np.minimum(subject_boxes[:, 3], object_boxes[:, 3]) - np.maximum(subject_boxes[:, 1], object_boxes[:, 1]), 0, None)
    inter = ix * iy
    iou = inter / (sw * sh + ow * oh - inter)

    uw = np.maximum(subject_boxes[:, 2], object_boxes[:, 2]) - np.minimum(subject_boxes[:, 0], object_boxes[:, 0])
    uh = np.maximum(subject_boxes[:, 3], object_boxes[:, 3]) - np.minimum(subject_boxes[:, 1], object_boxes[:, 1])

    return np.stack(
        [
            (ocx - scx) / sw,
            (ocy - scy) / sh,
            np.log(ow / sw),
            np.log(oh / sh),
            iou,
            uw * uh,
            uw,
            uh,
        ],
        axis=1,
    )


def pair_features(
    scene: SceneInstance,
    pairs: Sequence[Tuple[int, int]],
    object_table: EmbeddingTable,
) -> np.ndarray:
    """
    ``[P×F]`` features of the given ordered pairs.

    Args:
        scene: Source scene
        pairs: (subject, object) index pairs
        object_table: Frozen label embeddings
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    subj, obj = pairs[:, 0], pairs[:, 1]
    bs, bo = scene.boxes[subj], scene.boxes[obj]
    return np.concatenate(
        [
            bs,
            bo,
            relative_spatial(bs, bo),
            scene.visuals[subj],
            scene.visuals[obj],
            object_table.rows[scene.labels[subj]],
            object_table.rows[scene.labels[obj]],
        ],
        axis=1,
    )
