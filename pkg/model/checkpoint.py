"""
============================================================================
SGG-HT - CHECKPOINTS
============================================================================
``SGHT`` container of named float64 arrays (little-endian)::

    magic "SGHT" | u32 version | u32 digest length | digest (ascii hex)
    u32 array count
    per array: u32 name length | name | u32 rank | u32 dims… | f8 data
    u32 crc32 of everything above

Frozen tables are stored under ``frozen.*`` so a checkpoint alone
reproduces evaluation logits bitwise.
============================================================================
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Dict

import numpy as np

from config.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from config.settings import RunConfig
from exceptions import CorruptionError, DataError, FormatError, VersionError
from model.params import ModelParams, init_params
from stats.embeddings import EmbeddingTable
from stats.frequency import FrequencyBias
from utils.helpers import FileHelper
from utils.logger import get_logger


logger = get_logger("Checkpoint")

_U32 = struct.Struct("<I")


# ============================================================================
# ARRAY COLLECTION
# ============================================================================

def checkpoint_arrays(params: ModelParams) -> Dict[str, np.ndarray]:
    """Every array a checkpoint stores, trainable first."""
    arrays = {name: p.data for name, p in params.named().items()}
    arrays["frozen.object_embedding"] = params.object_table.rows
    arrays["frozen.predicate_embedding"] = params.predicate_table.rows
    if params.freq_bias is not None:
        n_obj = params.dims.num_object_classes
        arrays["frozen.freq_bias"] = params.freq_bias.dense(n_obj)
        arrays["frozen.freq_observed"] = params.freq_bias.observed_mask(n_obj)
    if params.class_counts is not None:
        arrays["frozen.class_counts"] = np.asarray(params.class_counts, dtype=np.float64)
    return arrays


# ============================================================================
# WRITE
# ============================================================================

def encode_checkpoint(params: ModelParams, digest: str) -> bytes:
    """Serialize parameters and tables."""
    arrays = checkpoint_arrays(params)
    digest_bytes = digest.encode("ascii")
    parts = [
        CHECKPOINT_MAGIC,
        _U32.pack(CHECKPOINT_VERSION),
        _U32.pack(len(digest_bytes)),
        digest_bytes,
        _U32.pack(len(arrays)),
    ]
    for name, array in arrays.items():
        name_bytes = name.encode("utf-8")
        parts.append(_U32.pack(len(name_bytes)))
        parts.append(name_bytes)
        parts.append(_U32.pack(array.ndim))
        parts.extend(_U32.pack(d) for d in array.shape)
        parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + _U32.pack(zlib.crc32(body))


def save_checkpoint(params: ModelParams, cfg: RunConfig, path: Path) -> Path:
    """
    Write a checkpoint atomically.

    Args:
        params: Model parameters
        cfg: Run configuration (its digest is stored)
        path: Destination
    """
    path = Path(path)
    FileHelper.atomic_write_bytes(path, encode_checkpoint(params, cfg.digest()))
    logger.debug(f"Checkpoint written to {path}")
    return path


# ============================================================================
# READ
# ============================================================================

def decode_checkpoint(data: bytes, path: Path | str = "<memory>") -> tuple[str, Dict[str, np.ndarray]]:
    """
    Parse checkpoint bytes into the stored digest and arrays.

    Raises:
        FormatError: bad magic
        VersionError: unsupported container version
        CorruptionError: truncation or checksum failure
    """
    path = Path(path)
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(
            f"{path}: not a checkpoint file",
            expected_magic=CHECKPOINT_MAGIC,
            found_magic=bytes(data[:4]),
            path=path,
        )
    if len(data) < 12:
        raise CorruptionError(f"{path}: truncated header", path=path)
    body, stored = data[:-4], _U32.unpack(data[-4:])[0]

    pos = 4

    def take(size: int) -> bytes:
        nonlocal pos
        if pos + size > len(body):
            raise CorruptionError(f"{path}: truncated at offset {pos}", path=path)
        chunk = body[pos:pos + size]
        pos += size
        return chunk

    def u32() -> int:
        return _U32.unpack(take(4))[0]

    version = u32()
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"{path}: checkpoint version {version} is not supported",
            expected=CHECKPOINT_VERSION,
            found=version,
            path=path,
        )
    if zlib.crc32(body) != stored:
        raise CorruptionError(f"{path}: checksum mismatch", path=path)

    digest = take(u32()).decode("ascii")
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(u32()):
        name = take(u32()).decode("utf-8")
        shape = tuple(u32() for _ in range(u32()))
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(body):
        raise CorruptionError(f"{path}: {len(body) - pos} trailing bytes", path=path)
    return digest, arrays


def load_checkpoint(path: Path, cfg: RunConfig) -> ModelParams:
    """
    Restore parameters for a run configuration.

    Raises:
        DataError: missing file or array set not matching the config
        VersionError: config digest mismatch
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}", path=path)
    digest, arrays = decode_checkpoint(path.read_bytes(), path)
    expected = cfg.digest()
    if digest != expected:
        raise VersionError(
            f"{path}: checkpoint was trained with a different configuration",
            expected=expected,
            found=digest,
            path=path,
        )

    params = init_params(cfg)
    params.object_table = EmbeddingTable(rows=arrays.pop("frozen.object_embedding"))
    params.predicate_table = EmbeddingTable(rows=arrays.pop("frozen.predicate_embedding"))
    if "frozen.freq_bias" in arrays:
        params.freq_bias = FrequencyBias.from_dense(
            arrays.pop("frozen.freq_bias"), arrays.pop("frozen.freq_observed")
        )
    counts = arrays.pop("frozen.class_counts", None)
    params.class_counts = None if counts is None else counts.astype(np.int64)

    named = params.named()
    if set(named) != set(arrays):
        missing = sorted(set(named) - set(arrays))
        extra = sorted(set(arrays) - set(named))
        raise DataError(
            f"{path}: parameter set mismatch (missing {missing[:3]}, unexpected {extra[:3]})",
            path=path,
        )
    for name, value in named.items():
        if arrays[name].shape != value.shape:
            raise DataError(
                f"{path}: {name} has shape {arrays[name].shape}, expected {value.shape}",
                path=path,
            )
        value.data = arrays[name].copy()
        value.zero_grad()
    logger.info(f"Loaded checkpoint {path} ({params.parameter_count()} parameters)")
    return params
