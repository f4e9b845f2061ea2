"""
============================================================================
SGG-HT - EVALUATOR
============================================================================
Test-split scoring and the evaluation artefacts of a run directory:
metrics CSV, per-class CSV, per-scene top triplets and the prediction
dump used for independent re-computation.
============================================================================
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence

import numpy as np

from config.constants import (
    METRICS_CSV,
    PER_CLASS_CSV,
    PREDICTIONS_JSONL,
    RECALL_KS,
    TOP_TRIPLETS_TXT,
    RunMode,
)
from config.settings import RunConfig
from dataset.models import Dataset, SceneInstance
from evaluation.matching import RankedTriplets, rank_triplets
from evaluation.report import MetricsReport, build_report, write_metrics_csv, write_per_class_csv
from exceptions import NumericError
from model.params import ModelParams
from model.predictor import ForwardOptions, ScenePrediction, forward_scene
from stats.class_stats import count_predicates, select_head_set
from utils.helpers import FileHelper
from utils.logger import get_logger


logger = get_logger("Evaluator")


@dataclass
class EvaluationResult:
    """Scored test split."""

    report: MetricsReport
    rankings: List[RankedTriplets]
    scene_indices: List[int]
    graph_constraint: bool


def predict_scenes(
    params: ModelParams,
    scenes: Sequence[SceneInstance],
    options: ForwardOptions,
) -> List[ScenePrediction]:
    """Eval-mode predictions in scene order."""
    return [forward_scene(scene, params, None, RunMode.EVAL, options)[0] for scene in scenes]


def probability_check(predictions: Sequence[ScenePrediction], tol: float = 1e-9) -> bool:
    """True when every pair's probabilities sum to one."""
    return all(
        p.num_pairs == 0 or bool(np.all(np.abs(p.probs.sum(axis=1) - 1.0) <= tol)) for p in predictions
    )


def eval_head_set(params: ModelParams, dataset: Dataset, rho: float, neg_ratio: int, max_pairs: int) -> FrozenSet[int]:
    """Head set from the checkpointed training counts, or recounted."""
    counts = params.class_counts
    if counts is None:
        counts = count_predicates(dataset, None, neg_ratio, max_pairs).counts
    return select_head_set(counts, rho)


def evaluate_split(
    params: ModelParams,
    dataset: Dataset,
    cfg: RunConfig,
    graph_constraint: Optional[bool] = None,
    freq_bias: Optional[bool] = None,
    head_set: Optional[FrozenSet[int]] = None,
) -> EvaluationResult:
    """
    Score every test scene and compute the metrics.

    Args:
        params: Model parameters
        dataset: Dataset (its test split is used)
        cfg: Run configuration
        graph_constraint: override of ``eval.graph_constraint``
        freq_bias: override of ``eval.freq_bias``
        head_set: head classes for the breakdown (derived when omitted)
    """
    gc = cfg.eval.graph_constraint if graph_constraint is None else graph_constraint
    options = ForwardOptions.from_config(cfg, RunMode.EVAL)
    if freq_bias is not None:
        options = replace(options, freq_bias=freq_bias)

    indices = dataset.test_indices()
    scenes = dataset.subset(indices)
    predictions = predict_scenes(params, scenes, options)
    if not probability_check(predictions):
        raise NumericError("predicate probabilities do not sum to one", op="softmax")
    rankings = [rank_triplets(p.pairs, p.probs, gc) for p in predictions]
    if head_set is None:
        head_set = eval_head_set(params, dataset, cfg.crm.rho, cfg.model.neg_ratio, cfg.model.max_pairs)
    report = build_report(
        rankings,
        [scene.triplets() for scene in scenes],
        params.dims.num_classes,
        head_set,
        RECALL_KS,
    )
    return EvaluationResult(report=report, rankings=rankings, scene_indices=indices, graph_constraint=gc)


# ============================================================================
# ARTEFACTS
# ============================================================================

def _describe(scene: SceneInstance, s: int, o: int, p: int) -> str:
    return (
        f"object_{int(scene.labels[s])}#{s} --predicate_{p}--> "
        f"object_{int(scene.labels[o])}#{o}"
    )


def render_top_triplets(result: EvaluationResult, dataset: Dataset, top: int = 5) -> str:
    """Text listing of each test scene's best triplets and its ground truth."""
    lines: List[str] = []
    for index, ranked in zip(result.scene_indices, result.rankings):
        scene = dataset.scenes[index]
        lines.append(f"scene {index}")
        for rank, (s, o, p, score) in enumerate(ranked.entries[:top], start=1):
            truth = (s, o, p) in set(scene.triplets())
            mark = " [gt]" if truth else ""
            lines.append(f"  {rank}. {_describe(scene, s, o, p)}  score={score:.4f}{mark}")
        for s, o, p in scene.triplets():
            lines.append(f"  gt: {_describe(scene, s, o, p)}")
    return "\n".join(lines) + "\n"


def prediction_lines(result: EvaluationResult, dataset: Dataset, keep: int = max(RECALL_KS)) -> List[str]:
    """JSON lines: ranked triplets (first ``keep``) and ground truth per scene."""
    out = []
    for index, ranked in zip(result.scene_indices, result.rankings):
        out.append(
            json.dumps(
                {
                    "scene": index,
                    "graph_constraint": result.graph_constraint,
                    "ranked": [[s, o, p, score] for s, o, p, score in ranked.entries[:keep]],
                    "gt": [list(t) for t in dataset.scenes[index].triplets()],
                }
            )
        )
    return out


def write_eval_outputs(result: EvaluationResult, dataset: Dataset, run_dir: Path, top: int = 5) -> None:
    """Write metrics, per-class, top-triplet and prediction files."""
    run_dir = Path(run_dir)
    write_metrics_csv(result.report, run_dir / METRICS_CSV)
    write_per_class_csv(result.report, run_dir / PER_CLASS_CSV)
    FileHelper.atomic_write_text(run_dir / TOP_TRIPLETS_TXT, render_top_triplets(result, dataset, top))
    lines = prediction_lines(result, dataset)
    FileHelper.atomic_write_text(run_dir / PREDICTIONS_JSONL, "\n".join(lines) + ("\n" if lines else ""))
    logger.info(f"Evaluation written to {run_dir}: {result.report.summary_line(20)}")


def load_prediction_dump(path: Path) -> tuple[List[RankedTriplets], List[List[tuple]]]:
    """Read a prediction dump back into rankings and ground truth."""
    rankings: List[RankedTriplets] = []
    gts: List[List[tuple]] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            rankings.append(
                RankedTriplets(
                    entries=[(int(s), int(o), int(p), float(v)) for s, o, p, v in row["ranked"]],
                    graph_constraint=bool(row["graph_constraint"]),
                )
            )
            gts.append([tuple(int(x) for x in t) for t in row["gt"]])
    return rankings, gts
