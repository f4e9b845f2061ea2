"""
============================================================================
SGG-HT - HELPERS UTILITY
============================================================================
Collection of helper functions: seeding, split hashing, file writing
and CSV.
============================================================================
"""

import csv
import hashlib
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np


# ============================================================================
# SEED UTILITIES
# ============================================================================

class SeedHelper:
    """
    Deterministic random streams.
    """

    @staticmethod
    def rng(seed: int) -> np.random.Generator:
        """
        Build an independent generator for a seed.

        Args:
            seed: Non-negative seed

        Returns:
            numpy Generator (PCG64)
        """
        return np.random.Generator(np.random.PCG64(seed))

    @staticmethod
    def derive(seed: int, *labels: Any) -> int:
        """
        Derive a sub-seed from a seed and labels.

        Args:
            seed: Parent seed
            *labels: Stream labels (e.g. "init", "batches")

        Returns:
            63-bit seed
        """
        text = ":".join([str(seed), *map(str, labels)])
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") >> 1

    @staticmethod
    def ablation_seed(base_seed: int, cell_index: int, replicate: int) -> int:
        """Seed of one ablation run."""
        return base_seed + cell_index * 1000 + replicate


# ============================================================================
# HASHING UTILITIES
# ============================================================================

class HashHelper:
    """
    Hashing helpers.
    """

    @staticmethod
    def split_bucket(seed: int, index: int, buckets: int = 5) -> int:
        """
        Stable bucket of a scene index under a seed.

        Args:
            seed: Dataset seed
            index: Scene index
            buckets: Number of buckets

        Returns:
            Bucket in [0, buckets)
        """
        digest = hashlib.sha256(f"split:{seed}:{index}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % buckets


# ============================================================================
# FILE UTILITIES
# ============================================================================

class FileHelper:
    """
    File writing helpers.
    """

    @staticmethod
    def atomic_write_bytes(path: Path, data: bytes) -> None:
        """
        Write bytes to a sibling temp file and rename into place.

        Args:
            path: Destination
            data: Payload
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def atomic_write_text(path: Path, text: str) -> None:
        """UTF-8 variant of atomic_write_bytes."""
        FileHelper.atomic_write_bytes(path, text.encode("utf-8"))


# ============================================================================
# CSV UTILITIES
# ============================================================================

class CsvHelper:
    """
    CSV reading and writing with exact float text.
    """

    @staticmethod
    def format_value(value: Any) -> str:
        """
        Render a cell; floats use repr so re-reading is bitwise exact.

        Args:
            value: Cell value

        Returns:
            Cell text
        """
        if value is None:
            return ""
        if isinstance(value, (bool, np.bool_)):
            return "1" if value else "0"
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        return str(value)

    @staticmethod
    def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        """
        Write a CSV file atomically.

        Args:
            path: Destination
            header: Column names
            rows: Row values
        """
        lines: List[List[str]] = [list(header)]
        lines.extend([CsvHelper.format_value(v) for v in row] for row in rows)

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(lines)
        os.replace(tmp, path)

    @staticmethod
    def read_rows(path: Path) -> List[Dict[str, str]]:
        """
        Read a CSV file into dict rows.

        Args:
            path: CSV file

        Returns:
            List of rows keyed by header
        """
        with Path(path).open(newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))


# ============================================================================
# END OF HELPERS MODULE
# ============================================================================
