"""
============================================================================
SGG-HT - METRICS REPORT
============================================================================
R@K / mR@K summary, head/tail breakdown and their CSV renderings.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.constants import ABSENT, BACKGROUND, RECALL_KS
from evaluation.matching import RankedTriplets, Triplet, mean_recall_at_k, recall_at_k
from exceptions import DataError
from utils.helpers import CsvHelper


@dataclass
class Breakdown:
    """
    Head/tail summary of a per-class recall vector.

    ``None`` means the set holds no class with ground truth.
    """

    head_mean: Optional[float]
    tail_mean: Optional[float]
    per_class: np.ndarray


def breakdown_report(per_class: np.ndarray, head_set: Iterable[int]) -> Breakdown:
    """
    Mean recall over H∖{0} and over the remaining predicate classes.

    NaN entries (classes without ground truth) are left out of both.
    """
    per_class = np.asarray(per_class, dtype=np.float64)
    head = set(int(c) for c in head_set) - {BACKGROUND}
    head_vals = [per_class[c] for c in sorted(head) if c < len(per_class) and not np.isnan(per_class[c])]
    tail_vals = [
        per_class[c]
        for c in range(1, len(per_class))
        if c not in head and not np.isnan(per_class[c])
    ]
    return Breakdown(
        head_mean=float(np.mean(head_vals)) if head_vals else None,
        tail_mean=float(np.mean(tail_vals)) if tail_vals else None,
        per_class=per_class,
    )


@dataclass
class MetricsReport:
    """
    Evaluation summary.

    Attributes:
        recall: K -> R@K
        mean_recall: K -> mR@K
        per_class: K -> ``[R+1]`` per-class recall (NaN when absent)
        gt_counts: ``[R+1]`` ground-truth instances per class
        head_set: head classes used for the breakdown
        head_mean / tail_mean: K -> mean recall of each set (None when empty)
        scene_count: evaluated scenes
    """

    recall: Dict[int, float] = field(default_factory=dict)
    mean_recall: Dict[int, float] = field(default_factory=dict)
    per_class: Dict[int, np.ndarray] = field(default_factory=dict)
    gt_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    head_set: frozenset = frozenset({BACKGROUND})
    head_mean: Dict[int, Optional[float]] = field(default_factory=dict)
    tail_mean: Dict[int, Optional[float]] = field(default_factory=dict)
    scene_count: int = 0

    def summary_line(self, k: int = 20) -> str:
        def fmt(v: Optional[float]) -> str:
            return ABSENT if v is None else f"{v:.4f}"

        return (
            f"R@{k}={self.recall[k]:.4f} mR@{k}={self.mean_recall[k]:.4f} "
            f"head={fmt(self.head_mean[k])} tail={fmt(self.tail_mean[k])}"
        )


def build_report(
    predictions: Sequence[RankedTriplets],
    gt: Sequence[Sequence[Triplet]],
    num_classes: int,
    head_set: Iterable[int],
    ks: Sequence[int] = RECALL_KS,
) -> MetricsReport:
    """Compute every metric for the given cut-offs."""
    head_set = frozenset(int(c) for c in head_set) | {BACKGROUND}
    counts = np.zeros(num_classes, dtype=np.int64)
    for scene in gt:
        for _, _, p in scene:
            if int(p) != BACKGROUND:
                counts[int(p)] += 1

    report = MetricsReport(gt_counts=counts, head_set=head_set, scene_count=len(predictions))
    for k in ks:
        report.recall[k] = recall_at_k(predictions, gt, k)
        report.mean_recall[k], report.per_class[k] = mean_recall_at_k(predictions, gt, k, num_classes)
        section = breakdown_report(report.per_class[k], head_set)
        report.head_mean[k] = section.head_mean
        report.tail_mean[k] = section.tail_mean
    return report


# ============================================================================
# CSV
# ============================================================================

METRICS_HEADER = ("metric", "k", "value")
PER_CLASS_HEADER = ("class_id", "count", "recall@20", "recall@50", "recall@100", "is_head")


def _cell(value: Optional[float]):
    return ABSENT if value is None or (isinstance(value, float) and np.isnan(value)) else float(value)


def metrics_rows(report: MetricsReport) -> List[tuple]:
    rows = []
    for name, table in (
        ("R", report.recall),
        ("mR", report.mean_recall),
        ("head_mR", report.head_mean),
        ("tail_mR", report.tail_mean),
    ):
        for k in sorted(table):
            rows.append((name, k, _cell(table[k])))
    return rows


def write_metrics_csv(report: MetricsReport, path: Path) -> Path:
    """``metric,k,value`` rows."""
    CsvHelper.write_rows(path, METRICS_HEADER, metrics_rows(report))
    return Path(path)


def write_per_class_csv(report: MetricsReport, path: Path) -> Path:
    """One row per predicate class with its recall at 20/50/100."""
    rows = []
    for c in range(1, len(report.gt_counts)):
        rows.append(
            (
                c,
                int(report.gt_counts[c]),
                *(_cell(report.per_class[k][c]) if k in report.per_class else ABSENT for k in RECALL_KS),
                c in report.head_set,
            )
        )
    CsvHelper.write_rows(path, PER_CLASS_HEADER, rows)
    return Path(path)


def read_metrics_csv(path: Path) -> Dict[str, Dict[int, Optional[float]]]:
    """
    Parse a metrics CSV back into ``metric -> k -> value``.

    Raises:
        DataError: missing file or malformed rows
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"metrics file not found: {path}", path=path)
    out: Dict[str, Dict[int, Optional[float]]] = {}
    try:
        for row in CsvHelper.read_rows(path):
            value = None if row["value"] == ABSENT else float(row["value"])
            out.setdefault(row["metric"], {})[int(row["k"])] = value
    except (KeyError, ValueError) as e:
        raise DataError(f"malformed metrics file {path}", path=path, cause=e) from e
    return out
