"""
============================================================================
SGG-HT - TRAINER
============================================================================
Optimizer loop over shuffled scene batches.

Step t (1-based) uses curriculum iteration l = t − 1, so l runs over
0..L−1 and every factor is defined. The test split is evaluated every
``eval_interval`` steps and after the last one; the best checkpoint is
chosen by mR@20.
============================================================================
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from autodiff import OptState, backward, sgd_step
from config.constants import (
    BACKGROUND,
    CHECKPOINT_BEST,
    CHECKPOINT_FINAL,
    DATASET_FILE,
    TRAIN_LOG_CSV,
    RunMode,
)
from config.settings import RunConfig
from curriculum.schedules import CurriculumState, ScheduleSpec
from dataset import gen_dataset, load_dataset
from dataset.models import Dataset
from evaluation.report import MetricsReport
from exceptions import DataError, NumericError
from harness.evaluator import EvaluationResult, evaluate_split, write_eval_outputs
from model.checkpoint import save_checkpoint
from model.params import ModelParams, init_params
from model.predictor import BatchObjective, ForwardOptions, batch_objective
from stats.class_stats import ClassStats, build_class_stats
from stats.frequency import build_frequency_bias
from utils.helpers import CsvHelper, FileHelper, SeedHelper
from utils.logger import PerformanceLogger, get_logger


logger = get_logger("Trainer")

TRAIN_LOG_HEADER = ("iter", "probe_class", "lambda_probe", "l_crw", "l_sc", "l_total", "wall_time")


@dataclass
class TrainLogRecord:
    """One logged step."""

    iter: int
    probe_class: int
    lambda_probe: float
    l_crw: float
    l_sc: float
    l_total: float
    wall_time: float

    def row(self) -> tuple:
        return (
            self.iter,
            self.probe_class,
            self.lambda_probe,
            self.l_crw,
            self.l_sc,
            self.l_total,
            self.wall_time,
        )


@dataclass
class TrainResult:
    """Outcome of a training run."""

    params: ModelParams
    stats: ClassStats
    log: List[TrainLogRecord] = field(default_factory=list)
    best_mr20: float = -1.0
    best_step: int = 0
    final: Optional[EvaluationResult] = None


def probe_class(stats: ClassStats) -> int:
    """Most frequent head predicate (background when the head set has none)."""
    heads = [c for c in stats.head_set if c != BACKGROUND]
    if not heads:
        return BACKGROUND
    return min(heads, key=lambda c: (-int(stats.counts[c]), c))


class Trainer:
    """
    Training run over one dataset.

    Usage
    -----
        trainer = Trainer(cfg, dataset)
        result = trainer.run()
    """

    def __init__(self, cfg: RunConfig, dataset: Dataset, run_dir: Optional[Path] = None):
        self.cfg = cfg
        self.dataset = dataset
        self.run_dir = Path(run_dir if run_dir is not None else cfg.output_dir)
        self.train_indices = dataset.train_indices()

        self.stats = build_class_stats(
            dataset,
            None,
            cfg.crm.beta,
            cfg.crm.rho,
            cfg.crm.weighting,
            cfg.model.neg_ratio,
            cfg.model.max_pairs,
        )
        freq_bias = build_frequency_bias(
            dataset.train_scenes(),
            dataset.num_predicate_classes,
            cfg.model.freq_smoothing,
            cfg.model.freq_include_background,
        )
        self.params = init_params(cfg, freq_bias=freq_bias, class_counts=self.stats.counts)
        self.curriculum = CurriculumState(
            spec=ScheduleSpec(
                kind=cfg.crm.schedule,
                nu=cfg.crm.nu,
                alpha=cfg.crm.alpha,
                total_iters=cfg.optim.total_iters,
            ),
            head_set=self.stats.head_set,
            num_classes=self.stats.num_classes,
            enabled=cfg.crm.enabled,
        )
        self.options = ForwardOptions.from_config(cfg, RunMode.TRAIN)
        self.opt = OptState()
        self.probe = probe_class(self.stats)
        self._batch_rng = SeedHelper.rng(SeedHelper.derive(cfg.seed, "batches"))
        self._order: List[int] = []

    # ------------------------------------------------------------------
    # BATCHING
    # ------------------------------------------------------------------

    def next_batch(self) -> List[int]:
        """Scene indices of the next batch; the order reshuffles every epoch."""
        batch: List[int] = []
        while len(batch) < self.cfg.optim.batch_size:
            if not self._order:
                self._order = [self.train_indices[i] for i in self._batch_rng.permutation(len(self.train_indices))]
            batch.append(self._order.pop(0))
        return batch

    def pair_rng(self, step: int) -> np.random.Generator:
        """Negative-pair sampler of one step."""
        return SeedHelper.rng(SeedHelper.derive(self.cfg.seed, "pairs", step))

    # ------------------------------------------------------------------
    # STEP
    # ------------------------------------------------------------------

    def step(self, step: int, batch: List[int]) -> BatchObjective:
        """
        Forward, backward and update for one batch.

        Raises:
            NumericError: non-finite loss or gradient, tagged with the step
        """
        lam = self.curriculum.advance(step - 1)
        try:
            objective = batch_objective(
                self.dataset.subset(batch),
                self.params,
                self.stats,
                self.options,
                lam,
                self.pair_rng(step),
            )
            if not np.isfinite(objective.total.item()):
                raise NumericError("non-finite training loss", op="total_loss")
            backward(objective.total)
            sgd_step(
                self.params.named(),
                self.opt,
                self.cfg.optim.lr,
                self.cfg.optim.momentum,
                self.cfg.optim.clip_norm,
            )
        except NumericError as e:
            self._dump_failed_batch(step, batch, e)
            raise NumericError(
                f"numeric failure at step {step}: {e.message}",
                op=e.op,
                batch_id=step,
                cause=e,
            ) from e
        return objective

    def _dump_failed_batch(self, step: int, batch: List[int], error: NumericError) -> None:
        payload = {"batch_id": step, "scene_indices": batch, "op": error.op, "message": error.message}
        path = self.run_dir / "failed_batch.json"
        FileHelper.atomic_write_text(path, json.dumps(payload, indent=2))
        logger.error(f"Numeric failure at step {step}; batch written to {path}")

    # ------------------------------------------------------------------
    # RUN
    # ------------------------------------------------------------------

    def evaluate(self) -> EvaluationResult:
        return evaluate_split(self.params, self.dataset, self.cfg, head_set=self.stats.head_set)

    def _log_eval(self, step: int, report: MetricsReport, perf: PerformanceLogger) -> None:
        logger.info(f"[step {step}] {report.summary_line(20)}")
        perf.log_throughput(step)
        perf.log_memory_usage()

    def run(self) -> TrainResult:
        """Train for ``total_iters`` steps and write the run artefacts."""
        cfg = self.cfg
        total = cfg.optim.total_iters
        result = TrainResult(params=self.params, stats=self.stats)
        perf = PerformanceLogger()
        start = time.perf_counter()
        logger.info(
            f"Training {total} steps, batch {cfg.optim.batch_size}, "
            f"crm={'on' if cfg.crm.enabled else 'off'} ({cfg.crm.schedule.value}), "
            f"scm={'on' if cfg.scm.enabled else 'off'} ({cfg.scm.variant.value}), "
            f"probe class {self.probe}"
        )

        for step in range(1, total + 1):
            objective = self.step(step, self.next_batch())
            l = step - 1
            if l % cfg.optim.log_interval == 0 or step == total:
                record = TrainLogRecord(
                    iter=l,
                    probe_class=self.probe,
                    lambda_probe=self.curriculum.probe_value(self.probe),
                    l_crw=objective.crw.item(),
                    l_sc=objective.sc.item() if objective.sc is not None else 0.0,
                    l_total=objective.total.item(),
                    wall_time=time.perf_counter() - start,
                )
                result.log.append(record)
                logger.debug(
                    f"[step {step}] l_total={record.l_total:.5f} l_crw={record.l_crw:.5f} "
                    f"l_sc={record.l_sc:.5f} lambda={record.lambda_probe:.4f}"
                )

            if step % cfg.optim.eval_interval == 0 or step == total:
                evaluation = self.evaluate()
                self._log_eval(step, evaluation.report, perf)
                mr20 = evaluation.report.mean_recall[20]
                if mr20 > result.best_mr20:
                    result.best_mr20, result.best_step = mr20, step
                    save_checkpoint(self.params, cfg, self.run_dir / CHECKPOINT_BEST)
                result.final = evaluation

        save_checkpoint(self.params, cfg, self.run_dir / CHECKPOINT_FINAL)
        CsvHelper.write_rows(self.run_dir / TRAIN_LOG_CSV, TRAIN_LOG_HEADER, (r.row() for r in result.log))
        if result.final is not None:
            write_eval_outputs(result.final, self.dataset, self.run_dir, cfg.eval.report_top)
        logger.info(
            f"Training finished: best mR@20={result.best_mr20:.4f} at step {result.best_step}, "
            f"{time.perf_counter() - start:.1f}s"
        )
        return result


def read_train_log(path: Path) -> List[TrainLogRecord]:
    """Parse a train log CSV."""
    return [
        TrainLogRecord(
            iter=int(row["iter"]),
            probe_class=int(row["probe_class"]),
            lambda_probe=float(row["lambda_probe"]),
            l_crw=float(row["l_crw"]),
            l_sc=float(row["l_sc"]),
            l_total=float(row["l_total"]),
            wall_time=float(row["wall_time"]),
        )
        for row in CsvHelper.read_rows(path)
    ]


# ============================================================================
# DATASET RESOLUTION
# ============================================================================

def resolve_dataset(cfg: RunConfig) -> Tuple[RunConfig, Dataset]:
    """
    Dataset of a run and the config aligned to it.

    ``data.dataset_path`` wins, then ``<output_dir>/dataset.sgds``;
    otherwise the dataset is generated from ``data.gen``. The returned
    config carries the generator settings the dataset was built with so
    class counts and the checkpoint digest agree with the data.
    """
    candidates = [cfg.data.dataset_path, Path(cfg.output_dir) / DATASET_FILE]
    path = next((Path(p) for p in candidates if p is not None and Path(p).is_file()), None)
    if cfg.data.dataset_path is not None and path != Path(cfg.data.dataset_path):
        raise DataError(f"dataset file not found: {cfg.data.dataset_path}", path=cfg.data.dataset_path)

    if path is not None:
        dataset = load_dataset(path)
    else:
        dataset = gen_dataset(cfg.data.gen)
        logger.info(f"Generated {len(dataset)} scenes (no dataset file found)")

    if dataset.config != cfg.data.gen:
        cfg = cfg.with_overrides(data={"gen": dataset.config.model_dump(mode="python")})
    return cfg, dataset
