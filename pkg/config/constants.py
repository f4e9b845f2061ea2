"""
Constants Module for SGG-HT

Contains enumerations, file-format constants, fixed dimensions and exit
codes used throughout the application.
"""

from __future__ import annotations

from enum import Enum, IntEnum
from typing import Final, Tuple


class ScheduleKind(str, Enum):
    """
    Decay function used for head-class curriculum factors.
    """

    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    COSINE = "cosine"

    @classmethod
    def ablation_order(cls) -> Tuple["ScheduleKind", ...]:
        """Order in which schedule cells are reported."""
        return (cls.EXPONENTIAL, cls.COSINE, cls.LINEAR)


class ScmVariant(str, Enum):
    """
    How the whole-graph representation is obtained for the
    semantic-consistency loss.

    GLOBAL appends a mean node to the sequence and reads the encoder
    output at that position; MEAN encodes the triplets alone and
    averages the outputs.
    """

    GLOBAL = "global"
    MEAN = "mean"


class PredicateEmbedding(str, Enum):
    """Predicate semantic lookup mode."""

    SOFT = "soft"
    ARGMAX = "argmax"


class Weighting(str, Enum):
    """Per-class loss weights."""

    CLASS_BALANCED = "cb"
    UNIFORM = "uniform"


class RunMode(str, Enum):
    """Forward pass mode."""

    TRAIN = "train"
    EVAL = "eval"


class ExitCode(IntEnum):
    """Process exit codes of the command line."""

    OK = 0
    ERROR = 1
    CONFIGURATION = 2
    DATA = 3
    NUMERIC = 4


# ============================================================================
# FIXED DIMENSIONS
# ============================================================================

# Width of every semantic embedding row (object labels and predicates)
EMBEDDING_DIM: Final[int] = 200

# Relative spatial encoding width of a pair feature
RELATIVE_SPATIAL_DIM: Final[int] = 8

# Raw box width (x1, y1, x2, y2)
BOX_DIM: Final[int] = 4

# Background predicate index
BACKGROUND: Final[int] = 0

# Recall cut-offs
RECALL_KS: Final[Tuple[int, ...]] = (20, 50, 100)

# Layer norm denominator epsilon
LAYER_NORM_EPS: Final[float] = 1e-5


# ============================================================================
# FILE FORMATS
# ============================================================================

DATASET_MAGIC: Final[bytes] = b"SGDS"
DATASET_VERSION: Final[int] = 1

CHECKPOINT_MAGIC: Final[bytes] = b"SGHT"
CHECKPOINT_VERSION: Final[int] = 1

# File names inside a run directory
CHECKPOINT_BEST: Final[str] = "best.ckpt"
CHECKPOINT_FINAL: Final[str] = "final.ckpt"
TRAIN_LOG_CSV: Final[str] = "train_log.csv"
METRICS_CSV: Final[str] = "metrics.csv"
PER_CLASS_CSV: Final[str] = "per_class.csv"
TOP_TRIPLETS_TXT: Final[str] = "top_triplets.txt"
PREDICTIONS_JSONL: Final[str] = "predictions.jsonl"
ABLATION_CSV: Final[str] = "ablation.csv"
REPORT_TXT: Final[str] = "report.txt"
DATASET_FILE: Final[str] = "dataset.sgds"
DATASET_SUMMARY: Final[str] = "dataset_summary.csv"
RESOLVED_CONFIG: Final[str] = "config.json"

# Marker written where a mean is undefined (e.g. empty tail set)
ABSENT: Final[str] = "NA"
