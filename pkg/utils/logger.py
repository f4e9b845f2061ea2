"""
============================================================================
SGG-HT - LOGGING UTILITY
============================================================================
Loguru-based logging with a console sink, a structured JSON run log and
a separate error log.
============================================================================
"""

import sys
import time
from functools import wraps
from pathlib import Path
from typing import Optional

import psutil
from loguru import logger


# ============================================================================
# LOGGER CONFIGURATION
# ============================================================================

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan> - <level>{message}</level>"
)


def setup_logging(
    level: str = "INFO",
    log_dir: Optional[Path] = None,
    colorize: bool = True,
) -> None:
    """
    Configure logging sinks.

    Args:
        level: Minimum level for console and run log
        log_dir: Run directory; when given, ``run.log`` (JSON lines) and
            ``errors.log`` are written there
        colorize: Colorize console output
    """
    # Remove default loguru handler
    logger.remove()
    logger.configure(extra={"name": "root"})

    log_level = level.upper()

    # Console Handler
    logger.add(
        sys.stderr,
        format=CONSOLE_FORMAT,
        level=log_level,
        colorize=colorize,
        backtrace=True,
        diagnose=False,
    )

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        # JSON format for structured logging
        logger.add(
            log_dir / "run.log",
            level=log_level,
            rotation="50 MB",
            retention=5,
            serialize=True,
            backtrace=True,
            diagnose=False,
            enqueue=False,
        )

        # Error log file (separate file for errors)
        logger.add(
            log_dir / "errors.log",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {extra[name]} | {message}",
            level="ERROR",
            backtrace=True,
            diagnose=False,
        )

    logger.bind(name="Logging").debug(f"Logging initialized at {log_level} (run dir: {log_dir})")


def get_logger(name: Optional[str] = None):
    """
    Get logger instance with optional name.

    Args:
        name: Component name

    Returns:
        Logger instance
    """
    return logger.bind(name=name or "root")


# ============================================================================
# LOG DECORATORS
# ============================================================================

def log_execution_time(func):
    """
    Decorator to log function execution time.

    Args:
        func: Function to decorate

    Returns:
        Decorated function
    """
    timed = get_logger("Timing")

    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            timed.debug(f"{func.__name__} finished in {time.perf_counter() - start_time:.3f}s")
            return result
        except Exception as e:
            timed.error(f"{func.__name__} failed after {time.perf_counter() - start_time:.3f}s: {e}")
            raise

    return wrapper


# ============================================================================
# CONTEXT MANAGERS FOR LOGGING
# ============================================================================

class LogContext:
    """
    Context manager that attaches fields (run id, ablation cell, seed)
    to every record emitted inside it.
    """

    def __init__(self, **context):
        """
        Initialize log context.

        Args:
            **context: Context key-value pairs
        """
        self.context = context
        self._cm = None

    def __enter__(self):
        """Enter context."""
        self._cm = logger.contextualize(**self.context)
        self._cm.__enter__()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Exit context."""
        if self._cm is not None:
            self._cm.__exit__(exc_type, exc_val, exc_tb)
            self._cm = None


# ============================================================================
# PERFORMANCE MONITORING
# ============================================================================

class PerformanceLogger:
    """
    Logger for training throughput and memory.
    """

    def __init__(self):
        """Initialize performance logger."""
        self.logger = get_logger("Performance")
        self._process = psutil.Process()
        self._last_time = time.perf_counter()
        self._last_step = 0

    def log_throughput(self, step: int) -> float:
        """
        Log optimizer steps per second since the previous call.

        Args:
            step: Current global step

        Returns:
            Steps per second
        """
        now = time.perf_counter()
        elapsed = max(now - self._last_time, 1e-9)
        rate = (step - self._last_step) / elapsed
        self._last_time, self._last_step = now, step
        self.logger.info(f"Throughput: {rate:.2f} steps/s")
        return rate

    def log_memory_usage(self) -> float:
        """Log resident memory in MB."""
        usage_mb = self._process.memory_info().rss / (1024 * 1024)
        self.logger.info(f"Memory usage: {usage_mb:.2f} MB")
        return usage_mb


# ============================================================================
# END OF LOGGER MODULE
# ============================================================================
