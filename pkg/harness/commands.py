"""
============================================================================
SGG-HT - COMMANDS
============================================================================
The five command-line operations. Each takes a resolved RunConfig, writes
into ``cfg.output_dir`` and returns what it produced; exceptions from the
SGHTException hierarchy propagate to the entry point unchanged.

    gen-data   dataset file + per-class summary
    train      checkpoints, train log, evaluation artefacts
    eval       metrics of a checkpoint on the test split
    ablate     component / schedule / variant grids over seeds
    report     text report of a run or ablation directory
============================================================================
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.constants import (
    ABLATION_CSV,
    ABSENT,
    DATASET_FILE,
    DATASET_SUMMARY,
    METRICS_CSV,
    PER_CLASS_CSV,
    RECALL_KS,
    REPORT_TXT,
    RESOLVED_CONFIG,
)
from config.settings import RunConfig
from dataset import gen_dataset, save_dataset, tail_classes
from dataset.models import Dataset
from evaluation.report import MetricsReport, read_metrics_csv
from harness.ablation import CellSummary, read_ablation_csv, run_ablation, write_ablation_csv
from harness.evaluator import evaluate_split, write_eval_outputs
from harness.trainer import Trainer, TrainResult, resolve_dataset
from model.checkpoint import load_checkpoint
from utils.helpers import CsvHelper, FileHelper
from utils.logger import LogContext, get_logger, log_execution_time


logger = get_logger("Commands")

SUMMARY_HEADER = ("class_id", "count", "train_count", "test_count", "is_tail")
TOTAL_ROW = "total"

# Directional checks of the components grid at mR@20
COMBINED_MARGIN = 0.02
SINGLE_MARGIN = 0.01
HEAD_RETENTION = 0.8


def _prepare_run_dir(cfg: RunConfig) -> Path:
    run_dir = Path(cfg.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    FileHelper.atomic_write_text(run_dir / RESOLVED_CONFIG, cfg.resolved_json() + "\n")
    return run_dir


# ============================================================================
# GEN-DATA
# ============================================================================

def dataset_summary_rows(dataset: Dataset) -> List[tuple]:
    """Annotated relations per predicate class, then a total row."""
    size = dataset.num_classes
    train = np.zeros(size, dtype=np.int64)
    test = np.zeros(size, dtype=np.int64)
    for index, scene in enumerate(dataset.scenes):
        if scene.num_relations:
            target = test if dataset.is_test(index) else train
            target += np.bincount(scene.relations[:, 2], minlength=size)
    tails = set(tail_classes(dataset.config))
    rows = [
        (c, int(train[c] + test[c]), int(train[c]), int(test[c]), c in tails)
        for c in range(1, size)
    ]
    rows.append((TOTAL_ROW, int(train[1:].sum() + test[1:].sum()), int(train[1:].sum()), int(test[1:].sum()), ABSENT))
    return rows


@log_execution_time
def cmd_gen_data(cfg: RunConfig) -> Path:
    """
    Generate the dataset of ``data.gen`` and write it with its summary.

    Raises:
        ConfigurationError: invalid generator settings (nothing is written)
    """
    dataset = gen_dataset(cfg.data.gen)
    run_dir = _prepare_run_dir(cfg)
    path = save_dataset(dataset, run_dir / DATASET_FILE)
    CsvHelper.write_rows(run_dir / DATASET_SUMMARY, SUMMARY_HEADER, dataset_summary_rows(dataset))
    logger.info(
        f"Dataset: {len(dataset)} scenes, {len(dataset.train_indices())} train / "
        f"{len(dataset.test_indices())} test, written to {path}"
    )
    return path


# ============================================================================
# TRAIN / EVAL
# ============================================================================

@log_execution_time
def cmd_train(cfg: RunConfig) -> TrainResult:
    """Train on the resolved dataset and write the run artefacts."""
    cfg, dataset = resolve_dataset(cfg)
    run_dir = _prepare_run_dir(cfg)
    with LogContext(run_id=str(run_dir), cell="train", seed=cfg.seed):
        return Trainer(cfg, dataset, run_dir).run()


@log_execution_time
def cmd_eval(
    cfg: RunConfig,
    checkpoint: Path,
    dataset_path: Optional[Path] = None,
    graph_constraint: Optional[bool] = None,
    freq_bias: Optional[bool] = None,
) -> MetricsReport:
    """
    Evaluate a checkpoint on the test split.

    Args:
        cfg: Run configuration the checkpoint was trained with
        checkpoint: Checkpoint file
        dataset_path: Dataset file (defaults to the config's resolution)
        graph_constraint: override of ``eval.graph_constraint``
        freq_bias: override of ``eval.freq_bias``

    Raises:
        VersionError: checkpoint digest differs from the config's
    """
    if dataset_path is not None:
        cfg = cfg.with_overrides(data={"dataset_path": Path(dataset_path)})
    cfg, dataset = resolve_dataset(cfg)
    params = load_checkpoint(checkpoint, cfg)
    run_dir = _prepare_run_dir(cfg)
    result = evaluate_split(params, dataset, cfg, graph_constraint=graph_constraint, freq_bias=freq_bias)
    write_eval_outputs(result, dataset, run_dir, cfg.eval.report_top)
    return result.report


# ============================================================================
# ABLATE
# ============================================================================

@log_execution_time
def cmd_ablate(cfg: RunConfig, grids: Optional[Sequence[str]] = None) -> Path:
    """
    Run the ablation grids on one shared dataset file.

    Returns:
        Path of the ablation table
    """
    cfg, dataset = resolve_dataset(cfg)
    run_dir = _prepare_run_dir(cfg)
    dataset_path = cfg.data.dataset_path
    if dataset_path is None:
        dataset_path = run_dir / DATASET_FILE
        if not dataset_path.is_file():
            save_dataset(dataset, dataset_path)
    outcomes = run_ablation(cfg, dataset_path, run_dir, grids)
    return write_ablation_csv(outcomes, run_dir / ABLATION_CSV)


# ============================================================================
# REPORT
# ============================================================================

def _fmt(value: Optional[float]) -> str:
    return ABSENT if value is None else f"{value:.4f}"


def _metrics_table(metrics: Dict[str, Dict[int, Optional[float]]]) -> List[str]:
    names = [n for n in ("R", "mR", "head_mR", "tail_mR") if n in metrics]
    lines = ["metric    " + "".join(f"@{k:<9}" for k in RECALL_KS)]
    for name in names:
        lines.append(f"{name:<10}" + "".join(f"{_fmt(metrics[name].get(k)):<10}" for k in RECALL_KS))
    return lines


def _per_class_table(path: Path) -> List[str]:
    rows = CsvHelper.read_rows(path)
    lines = ["class  count  recall@20  recall@50  recall@100  set"]
    for row in rows:
        group = "head" if row["is_head"] == "1" else "tail"
        lines.append(
            f"{row['class_id']:>5}  {row['count']:>5}  {row['recall@20']:>9}  "
            f"{row['recall@50']:>9}  {row['recall@100']:>10}  {group}"
        )
    return lines


def directional_checks(summaries: Sequence[CellSummary]) -> List[tuple]:
    """
    Ordering checks on the components grid medians.

    Returns:
        (description, passed or None when a cell is missing) rows
    """
    cells = {s.cell: s.median for s in summaries if s.grid == "components"}

    def get(cell: str, column: str) -> Optional[float]:
        return cells.get(cell, {}).get(column)

    checks = []
    base = get("baseline", "mR@20")
    for cell, margin in (("crm+scm", COMBINED_MARGIN), ("crm", SINGLE_MARGIN), ("scm", SINGLE_MARGIN)):
        value = get(cell, "mR@20")
        passed = None if base is None or value is None else value - base >= margin
        checks.append((f"mR@20 {cell} - baseline >= {margin}", passed))

    head_base = get("baseline", "head_mR@20")
    head_full = get("crm+scm", "head_mR@20")
    passed = None if head_base is None or head_full is None else head_full >= HEAD_RETENTION * head_base
    checks.append((f"head mR@20 crm+scm >= {HEAD_RETENTION} x baseline", passed))
    return checks


def render_report(run_dir: Path) -> str:
    """Text report of whatever metric and ablation tables ``run_dir`` holds."""
    run_dir = Path(run_dir)
    lines = [f"SGG-HT report: {run_dir}", ""]

    if (run_dir / METRICS_CSV).is_file():
        lines += ["PredCls metrics", *_metrics_table(read_metrics_csv(run_dir / METRICS_CSV)), ""]
    if (run_dir / PER_CLASS_CSV).is_file():
        lines += ["Per-class recall", *_per_class_table(run_dir / PER_CLASS_CSV), ""]

    if (run_dir / ABLATION_CSV).is_file():
        summaries = read_ablation_csv(run_dir / ABLATION_CSV)
        columns = ("mR@20", "mR@50", "mR@100", "head_mR@20", "tail_mR@20")
        grid = None
        for s in summaries:
            if s.grid != grid:
                grid = s.grid
                lines += [f"Ablation: {grid} (median ± spread)", "cell      runs  " + "".join(f"{c:<18}" for c in columns)]
            cells = "".join(f"{_fmt(s.median.get(c)) + ' ± ' + _fmt(s.spread.get(c)):<18}" for c in columns)
            lines.append(f"{s.cell:<10}{s.completed:<6}{cells}")
        lines.append("")
        lines.append("Directional checks")
        for description, passed in directional_checks(summaries):
            mark = ABSENT if passed is None else ("pass" if passed else "FAIL")
            lines.append(f"  [{mark}] {description}")
        lines.append("")

    if len(lines) == 2:
        lines.append("no metrics or ablation tables found")
    return "\n".join(lines).rstrip() + "\n"


@log_execution_time
def cmd_report(cfg: RunConfig) -> Path:
    """Write ``report.txt`` for ``cfg.output_dir``."""
    run_dir = Path(cfg.output_dir)
    path = run_dir / REPORT_TXT
    FileHelper.atomic_write_text(path, render_report(run_dir))
    logger.info(f"Report written to {path}")
    return path
