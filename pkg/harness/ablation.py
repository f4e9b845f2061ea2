"""
============================================================================
SGG-HT - ABLATION RUNNER
============================================================================
Fixed experiment grids, each cell trained over several seeds.

Registered Grids
----------------
1.  components   {CRM off/on} × {SCM off/on}; the all-off cell is the
                 CE + class-balanced-weight baseline
2.  schedules    CRM decay kind: exponential, cosine, linear
3.  variants     SCM whole-graph representation: mean, global

Cells are numbered across all requested grids in this order; replicate r
of cell i runs with seed ``base + i·1000 + r``. Every run owns a
subdirectory, and aggregation reads only the ``metrics.csv`` files the
runs leave behind.
============================================================================
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from config.constants import ABSENT, METRICS_CSV, ScheduleKind, ScmVariant
from config.settings import RunConfig, build_config
from dataset import load_dataset
from evaluation.report import read_metrics_csv
from exceptions import SGHTException
from harness.trainer import Trainer
from utils.helpers import CsvHelper, SeedHelper
from utils.logger import LogContext, get_logger


logger = get_logger("Ablation")

GRID_ORDER = ("components", "schedules", "variants")

ABLATION_HEADER = (
    "grid",
    "cell",
    "cell_index",
    "replicate",
    "seed",
    "status",
    "mR@20",
    "mR@50",
    "mR@100",
    "R@20",
    "head_mR@20",
    "tail_mR@20",
)

# Row kinds in the replicate column besides integer replicate ids
MEDIAN = "median"
SPREAD = "spread"


# ============================================================================
# CELL DEFINITION
# ============================================================================

@dataclass
class AblationCell:
    """
    One grid cell.

    Attributes:
        grid: grid name
        name: cell label within the grid
        overrides: section -> key updates applied to the base config
        cell_index: position across all requested grids
    """

    grid: str
    name: str
    overrides: Dict[str, Dict[str, Any]]
    cell_index: int = 0

    def seed(self, base_seed: int, replicate: int) -> int:
        return SeedHelper.ablation_seed(base_seed, self.cell_index, replicate)

    def run_dir(self, root: Path, replicate: int) -> Path:
        return Path(root) / self.grid / self.name / f"rep{replicate}"


@dataclass
class RunOutcome:
    """Result of one (cell, replicate) run."""

    cell: AblationCell
    replicate: int
    seed: int
    status: str
    metrics: Dict[str, Dict[int, Optional[float]]] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def value(self, metric: str, k: int) -> Optional[float]:
        return self.metrics.get(metric, {}).get(k)


def _component_cells() -> List[AblationCell]:
    cells = []
    for name, crm, scm in (
        ("baseline", False, False),
        ("crm", True, False),
        ("scm", False, True),
        ("crm+scm", True, True),
    ):
        cells.append(AblationCell("components", name, {"crm": {"enabled": crm}, "scm": {"enabled": scm}}))
    return cells


def _schedule_cells() -> List[AblationCell]:
    return [
        AblationCell(
            "schedules",
            kind.value,
            {"crm": {"enabled": True, "schedule": kind.value}, "scm": {"enabled": True}},
        )
        for kind in ScheduleKind.ablation_order()
    ]


def _variant_cells() -> List[AblationCell]:
    return [
        AblationCell(
            "variants",
            variant.value,
            {"crm": {"enabled": True}, "scm": {"enabled": True, "variant": variant.value}},
        )
        for variant in (ScmVariant.MEAN, ScmVariant.GLOBAL)
    ]


GRID_BUILDERS = {
    "components": _component_cells,
    "schedules": _schedule_cells,
    "variants": _variant_cells,
}


def build_cells(grids: Sequence[str]) -> List[AblationCell]:
    """Cells of the requested grids, numbered in grid order."""
    cells: List[AblationCell] = []
    for grid in GRID_ORDER:
        if grid in grids:
            cells.extend(GRID_BUILDERS[grid]())
    for index, cell in enumerate(cells):
        cell.cell_index = index
    return cells


def cell_config(base: RunConfig, cell: AblationCell, replicate: int, root: Path, dataset_path: Path) -> RunConfig:
    """Config of one run: the base config with the cell overrides, seed and paths."""
    sections: Dict[str, Any] = {name: dict(update) for name, update in cell.overrides.items()}
    sections["data"] = {"dataset_path": Path(dataset_path)}
    sections["seed"] = cell.seed(base.seed, replicate)
    sections["output_dir"] = cell.run_dir(root, replicate)
    return base.with_overrides(**sections)


# ============================================================================
# EXECUTION
# ============================================================================

def run_cell(config_data: Dict[str, Any], grid: str, cell: str) -> None:
    """
    Train one run in the current process.

    Takes a plain config mapping so it can be shipped to worker processes.
    """
    cfg = build_config(config_data)
    run_dir = Path(cfg.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    with LogContext(run_id=str(run_dir), cell=f"{grid}/{cell}", seed=cfg.seed):
        dataset = load_dataset(cfg.data.dataset_path)
        Trainer(cfg, dataset, run_dir).run()


def _collect(cell: AblationCell, replicate: int, cfg: RunConfig, error: Optional[BaseException]) -> RunOutcome:
    outcome = RunOutcome(cell=cell, replicate=replicate, seed=cfg.seed, status="ok")
    if error is None:
        try:
            outcome.metrics = read_metrics_csv(Path(cfg.output_dir) / METRICS_CSV)
        except SGHTException as e:
            error = e
    if error is not None:
        outcome.status = "failed"
        outcome.error = str(error)
        logger.error(f"Run {cell.grid}/{cell.name} rep {replicate} (seed {cfg.seed}) failed: {error}")
    return outcome


def run_ablation(
    base: RunConfig,
    dataset_path: Path,
    root: Optional[Path] = None,
    grids: Optional[Sequence[str]] = None,
    seeds: Optional[int] = None,
    workers: Optional[int] = None,
) -> List[RunOutcome]:
    """
    Run every (cell, replicate) of the requested grids.

    A failing run is recorded as failed; the remaining runs continue.

    Args:
        base: Base run configuration
        dataset_path: Shared dataset file
        root: Output root (defaults to ``base.output_dir``)
        grids: Grid names (defaults to ``ablate.grids``)
        seeds: Replicates per cell (defaults to ``ablate.seeds``)
        workers: Worker processes, 1 = in-process (defaults to ``ablate.workers``)

    Returns:
        One outcome per run, ordered by cell then replicate
    """
    root = Path(root if root is not None else base.output_dir)
    grids = list(grids if grids is not None else base.ablate.grids)
    seeds = seeds if seeds is not None else base.ablate.seeds
    workers = workers if workers is not None else base.ablate.workers

    cells = build_cells(grids)
    jobs = [(cell, r, cell_config(base, cell, r, root, dataset_path)) for cell in cells for r in range(seeds)]
    logger.info(f"Ablation: {len(cells)} cells × {seeds} seeds = {len(jobs)} runs, {workers} worker(s)")

    outcomes: List[RunOutcome] = []
    if workers <= 1:
        for cell, r, cfg in jobs:
            error: Optional[BaseException] = None
            try:
                run_cell(cfg.model_dump(mode="python"), cell.grid, cell.name)
            except Exception as e:
                error = e
            outcomes.append(_collect(cell, r, cfg, error))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_cell, cfg.model_dump(mode="python"), cell.grid, cell.name) for cell, _, cfg in jobs
            ]
            for (cell, r, cfg), future in zip(jobs, futures):
                try:
                    future.result()
                    error = None
                except Exception as e:
                    error = e
                outcomes.append(_collect(cell, r, cfg, error))

    failed = sum(1 for o in outcomes if not o.ok)
    logger.info(f"Ablation finished: {len(outcomes) - failed} ok, {failed} failed")
    return outcomes


# ============================================================================
# SUMMARY
# ============================================================================

SUMMARY_METRICS = (
    ("mR", 20),
    ("mR", 50),
    ("mR", 100),
    ("R", 20),
    ("head_mR", 20),
    ("tail_mR", 20),
)


def summary_rows(outcomes: Sequence[RunOutcome]) -> List[tuple]:
    """
    One row per run, then a median and a spread (max − min) row per cell
    over its successful runs.
    """
    rows: List[tuple] = []
    by_cell: Dict[int, List[RunOutcome]] = {}
    for o in outcomes:
        by_cell.setdefault(o.cell.cell_index, []).append(o)
        values = [o.value(m, k) for m, k in SUMMARY_METRICS]
        rows.append(
            (o.cell.grid, o.cell.name, o.cell.cell_index, o.replicate, o.seed, o.status)
            + tuple(ABSENT if v is None else v for v in values)
        )

    for index in sorted(by_cell):
        group = by_cell[index]
        cell = group[0].cell
        ok = [o for o in group if o.ok]
        medians, spreads = [], []
        for m, k in SUMMARY_METRICS:
            values = [v for v in (o.value(m, k) for o in ok) if v is not None]
            medians.append(statistics.median(values) if values else ABSENT)
            spreads.append(max(values) - min(values) if values else ABSENT)
        status = f"{len(ok)}/{len(group)}"
        rows.append((cell.grid, cell.name, index, MEDIAN, ABSENT, status, *medians))
        rows.append((cell.grid, cell.name, index, SPREAD, ABSENT, status, *spreads))
    return rows


def write_ablation_csv(outcomes: Sequence[RunOutcome], path: Path) -> Path:
    """Write the per-run and per-cell aggregate table."""
    CsvHelper.write_rows(path, ABLATION_HEADER, summary_rows(outcomes))
    return Path(path)


@dataclass
class CellSummary:
    """Aggregate row of one cell as read back from the ablation table."""

    grid: str
    cell: str
    completed: str
    median: Dict[str, Optional[float]]
    spread: Dict[str, Optional[float]]


def read_ablation_csv(path: Path) -> List[CellSummary]:
    """Median and spread rows of an ablation table, in file order."""
    summaries: Dict[tuple, CellSummary] = {}
    metric_columns = ABLATION_HEADER[6:]

    def parse(row: Dict[str, str]) -> Dict[str, Optional[float]]:
        return {c: None if row[c] == ABSENT else float(row[c]) for c in metric_columns}

    for row in CsvHelper.read_rows(path):
        kind = row["replicate"]
        if kind not in (MEDIAN, SPREAD):
            continue
        key = (row["grid"], row["cell"])
        summary = summaries.setdefault(
            key, CellSummary(grid=row["grid"], cell=row["cell"], completed=row["status"], median={}, spread={})
        )
        if kind == MEDIAN:
            summary.median = parse(row)
        else:
            summary.spread = parse(row)
    return list(summaries.values())
