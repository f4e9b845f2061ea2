"""
============================================================================
SGG-HT - SEMANTIC EMBEDDINGS
============================================================================
Frozen 200-d embedding tables for object labels and predicates, and the
probability-weighted predicate lookup.

Default tables are seeded random matrices (entries uniform in
[−0.1, 0.1]). A plain-text word-vector file (``token v1 … v200`` per
line) can replace rows token by token.
============================================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from autodiff import Value
from config.constants import EMBEDDING_DIM
from exceptions import DataError, DimensionError
from utils.helpers import SeedHelper
from utils.logger import get_logger
from utils.validators import ArrayValidator


logger = get_logger("Embeddings")

BACKGROUND_TOKEN = "__background__"


def object_vocab(num_object_classes: int) -> List[str]:
    """Tokens of object classes; index 0 is unused padding."""
    return ["__pad__"] + [f"object_{i}" for i in range(1, num_object_classes + 1)]


def predicate_vocab(num_predicate_classes: int) -> List[str]:
    """Tokens of predicate classes; index 0 is background."""
    return [BACKGROUND_TOKEN] + [f"predicate_{c}" for c in range(1, num_predicate_classes + 1)]


@dataclass(frozen=True)
class EmbeddingTable:
    """
    Read-only ``[vocab×200]`` table.

    Attributes:
        rows: embedding matrix (not writeable)
        frozen: always True
    """

    rows: np.ndarray
    frozen: bool = True

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != EMBEDDING_DIM:
            raise DimensionError(
                f"embedding rows must be [vocab×{EMBEDDING_DIM}], got {rows.shape}",
                expected=[-1, EMBEDDING_DIM],
                actual=rows.shape,
            )
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "frozen", True)

    @property
    def vocab_size(self) -> int:
        return int(self.rows.shape[0])

    def lookup(self, index: int) -> np.ndarray:
        return self.rows[int(index)]

    def as_value(self) -> Value:
        """Constant node over the rows."""
        return Value(self.rows)

    @classmethod
    def random(cls, vocab_size: int, seed: int) -> "EmbeddingTable":
        """Seeded uniform[−0.1, 0.1] table."""
        rng = SeedHelper.rng(seed)
        return cls(rows=rng.uniform(-0.1, 0.1, size=(vocab_size, EMBEDDING_DIM)))

    @classmethod
    def from_vectors(
        cls,
        vocab: Sequence[str],
        vectors: Dict[str, np.ndarray],
        seed: int,
    ) -> "EmbeddingTable":
        """
        Table over ``vocab`` taking rows from ``vectors`` where present and
        from the seeded random table otherwise.
        """
        base = cls.random(len(vocab), seed).rows.copy()
        hits = 0
        for i, token in enumerate(vocab):
            vec = vectors.get(token)
            if vec is not None:
                base[i] = vec
                hits += 1
        logger.info(f"Embedding table: {hits}/{len(vocab)} rows from word vectors")
        return cls(rows=base)


def load_word_vectors(path: Path) -> Dict[str, np.ndarray]:
    """
    Read a plain-text word-vector file.

    Raises:
        DataError: missing file or a line without exactly 200 values
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}", path=path)
    vectors: Dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != EMBEDDING_DIM + 1:
                raise DataError(
                    f"{path}:{lineno}: expected a token and {EMBEDDING_DIM} values, got {len(parts) - 1}",
                    path=path,
                )
            try:
                vectors[parts[0]] = np.array([float(v) for v in parts[1:]])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: non-numeric value", path=path, cause=e) from e
    return vectors


def build_tables(
    num_object_classes: int,
    num_predicate_classes: int,
    seed: int,
    path: Optional[Path] = None,
) -> tuple[EmbeddingTable, EmbeddingTable]:
    """Object and predicate tables from a seed and optional word vectors."""
    obj_seed = SeedHelper.derive(seed, "object_embedding")
    pred_seed = SeedHelper.derive(seed, "predicate_embedding")
    if path is None:
        return (
            EmbeddingTable.random(num_object_classes + 1, obj_seed),
            EmbeddingTable.random(num_predicate_classes + 1, pred_seed),
        )
    vectors = load_word_vectors(path)
    return (
        EmbeddingTable.from_vectors(object_vocab(num_object_classes), vectors, obj_seed),
        EmbeddingTable.from_vectors(predicate_vocab(num_predicate_classes), vectors, pred_seed),
    )


# ============================================================================
# LOOKUP
# ============================================================================

def embed_soft(prob: Value, table: EmbeddingTable) -> Value:
    """
    Σ_c prob[c]·rows[c], differentiable in ``prob``.

    Accepts one ``[R+1]`` distribution or a ``[P×(R+1)]`` batch.

    Raises:
        ContractError: when a row is not a probability distribution
        DimensionError: when the class count differs from the table
    """
    if prob.shape[-1] != table.vocab_size:
        raise DimensionError(
            "probability width does not match the embedding table",
            expected=[table.vocab_size],
            actual=[prob.shape[-1]],
        )
    ArrayValidator.require_probabilities(prob.data, tol=1e-6, name="prob")
    return prob @ table.as_value()


def embed_argmax(prob: Value, table: EmbeddingTable) -> Value:
    """Row of the most probable class (constant; no gradient)."""
    ArrayValidator.require_probabilities(prob.data, tol=1e-6, name="prob")
    return Value(table.rows[np.argmax(prob.data, axis=-1)])
