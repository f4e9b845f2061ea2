"""
============================================================================
SGG-HT - COMMAND LINE ENTRY POINT
============================================================================
Head-to-tail predicate training on synthetic scene graphs.

Commands
--------
    gen-data   generate the dataset file and its class summary
    train      train a model and evaluate it on the test split
    eval       evaluate a checkpoint
    ablate     run the component / schedule / variant grids
    report     render report.txt for an output directory

Common flags: --config <toml>, --seed, --out, --override key=value
(repeatable), --print-config.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 data or format error, 4 numeric failure.
============================================================================
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

# ---------------------------------------------------------------------------
# Path setup: the project root is importable regardless of CWD
# ---------------------------------------------------------------------------
sys.path.insert(0, str(Path(__file__).parent))

from config.constants import ExitCode
from config.settings import RunConfig, load_config
from exceptions import SGHTException
from harness.commands import cmd_ablate, cmd_eval, cmd_gen_data, cmd_report, cmd_train
from utils.logger import get_logger, setup_logging


logger = get_logger("Main")


# ============================================================================
# ARGUMENT PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sght", description="Head-to-tail scene graph predicate training")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML config file")
    common.add_argument("--seed", type=int, default=None, help="Run seed")
    common.add_argument("--out", type=Path, default=None, help="Output directory")
    common.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Dotted config override, e.g. scm.enabled=false (repeatable)",
    )
    common.add_argument("--print-config", action="store_true", help="Print the resolved config as JSON")

    sub.add_parser("gen-data", parents=[common], help="Generate the synthetic dataset")
    sub.add_parser("train", parents=[common], help="Train a model")

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True, help="Checkpoint file")
    ev.add_argument("--dataset", type=Path, default=None, help="Dataset file")
    ev.add_argument("--no-graph-constraint", action="store_true", help="Rank every predicate of a pair")
    ev.add_argument("--no-freq-bias", action="store_true", help="Drop the frequency bias at inference")

    ab = sub.add_parser("ablate", parents=[common], help="Run the ablation grids")
    ab.add_argument(
        "--grid",
        action="append",
        choices=["components", "schedules", "variants"],
        default=None,
        help="Grid to run (repeatable; defaults to ablate.grids)",
    )

    sub.add_parser("report", parents=[common], help="Write report.txt for --out")
    return parser


# ============================================================================
# APPLICATION
# ============================================================================

class SghtApplication:
    """
    Resolves configuration, configures logging and dispatches one command.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg: Optional[RunConfig] = None

        self._handlers: Dict[str, Callable[[RunConfig], None]] = {
            "gen-data": self._gen_data,
            "train": self._train,
            "eval": self._eval,
            "ablate": self._ablate,
            "report": self._report,
        }

    # ------------------------------------------------------------------
    # HANDLERS
    # ------------------------------------------------------------------

    def _gen_data(self, cfg: RunConfig) -> None:
        path = cmd_gen_data(cfg)
        print(f"dataset: {path}")

    def _train(self, cfg: RunConfig) -> None:
        result = cmd_train(cfg)
        print(f"best mR@20={result.best_mr20:.4f} at step {result.best_step}")
        if result.final is not None:
            print(result.final.report.summary_line(20))

    def _eval(self, cfg: RunConfig) -> None:
        report = cmd_eval(
            cfg,
            self.args.checkpoint,
            dataset_path=self.args.dataset,
            graph_constraint=False if self.args.no_graph_constraint else None,
            freq_bias=False if self.args.no_freq_bias else None,
        )
        for k in sorted(report.recall):
            print(report.summary_line(k))

    def _ablate(self, cfg: RunConfig) -> None:
        path = cmd_ablate(cfg, self.args.grid)
        print(f"ablation table: {path}")

    def _report(self, cfg: RunConfig) -> None:
        path = cmd_report(cfg)
        print(path.read_text(encoding="utf-8"), end="")

    # ------------------------------------------------------------------
    # RUN
    # ------------------------------------------------------------------

    def run(self) -> int:
        """Execute the command and return the process exit code."""
        args = self.args
        try:
            self.cfg = load_config(args.config, args.seed, args.out, args.override)
            log_dir = Path(self.cfg.output_dir) if self.cfg.logging.to_file else None
            setup_logging(self.cfg.logging.level, log_dir, self.cfg.logging.colorize)

            if args.print_config:
                print(self.cfg.resolved_json())

            logger.info(f"Command {args.command} → {self.cfg.output_dir}")
            self._handlers[args.command](self.cfg)
            return int(ExitCode.OK)

        except SGHTException as e:
            logger.error(e.log_format())
            return int(e.exit_code)
        except KeyboardInterrupt:
            logger.warning("Interrupted")
            return int(ExitCode.ERROR)
        except Exception as e:
            logger.exception(f"Unexpected failure: {e}")
            return int(ExitCode.ERROR)


# ============================================================================
# ENTRY POINT
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return SghtApplication(args).run()


if __name__ == "__main__":
    sys.exit(main())
