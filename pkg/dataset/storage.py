"""
============================================================================
SGG-HT - DATASET STORAGE
============================================================================
``SGDS`` binary container and a line-delimited JSON debug exporter.

Layout (little-endian)::

    magic "SGDS" | u32 version | u32 config length | config JSON
    u32 scene count
    per scene:
        u32 n | u32 m | u32 D_v
        boxes  f8[n·4] | visuals f8[n·D_v]
        labels u4[n]   | relations u4[m·3]
        u32 crc32 of the record bytes above
============================================================================
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import List, Tuple

import numpy as np
from pydantic import ValidationError

from config.constants import DATASET_MAGIC, DATASET_VERSION
from dataset.models import Dataset, GenConfig, SceneInstance
from exceptions import CorruptionError, DataError, FormatError, VersionError
from utils.helpers import FileHelper
from utils.logger import get_logger
from utils.validators import SceneValidator


logger = get_logger("DatasetStorage")

_U32 = struct.Struct("<I")
_SCENE_HEADER = struct.Struct("<III")


# ============================================================================
# ENCODING
# ============================================================================

def _encode_scene(scene: SceneInstance) -> bytes:
    n, m, dv = scene.num_objects, scene.num_relations, scene.visual_dim
    record = b"".join(
        (
            _SCENE_HEADER.pack(n, m, dv),
            np.ascontiguousarray(scene.boxes, dtype="<f8").tobytes(),
            np.ascontiguousarray(scene.visuals, dtype="<f8").tobytes(),
            np.ascontiguousarray(scene.labels, dtype="<u4").tobytes(),
            np.ascontiguousarray(scene.relations.reshape(m, 3), dtype="<u4").tobytes(),
        )
    )
    return record + _U32.pack(zlib.crc32(record))


def encode_dataset(dataset: Dataset) -> bytes:
    """Serialize a dataset to ``SGDS`` bytes."""
    config_json = dataset.config.model_dump_json().encode("utf-8")
    parts = [
        DATASET_MAGIC,
        _U32.pack(DATASET_VERSION),
        _U32.pack(len(config_json)),
        config_json,
        _U32.pack(len(dataset.scenes)),
    ]
    parts.extend(_encode_scene(scene) for scene in dataset.scenes)
    return b"".join(parts)


def save_dataset(dataset: Dataset, path: Path) -> Path:
    """
    Write a dataset file atomically.

    Args:
        dataset: Dataset to write
        path: Destination

    Returns:
        The written path
    """
    path = Path(path)
    FileHelper.atomic_write_bytes(path, encode_dataset(dataset))
    logger.info(f"Saved {len(dataset)} scenes to {path}")
    return path


# ============================================================================
# DECODING
# ============================================================================

class _Reader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data: bytes, path: Path) -> None:
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, size: int, scene_index: int | None) -> bytes:
        end = self.pos + size
        if end > len(self.data):
            where = "header" if scene_index is None else f"scene {scene_index}"
            raise CorruptionError(
                f"{self.path}: truncated {where} (need {size} bytes at offset {self.pos}, "
                f"file has {len(self.data)})",
                scene_index=scene_index,
                path=self.path,
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u32(self, scene_index: int | None) -> int:
        return _U32.unpack(self.take(4, scene_index))[0]


def _decode_scene(reader: _Reader, index: int) -> SceneInstance:
    start = reader.pos
    n, m, dv = _SCENE_HEADER.unpack(reader.take(_SCENE_HEADER.size, index))
    boxes = np.frombuffer(reader.take(8 * n * 4, index), dtype="<f8").reshape(n, 4)
    visuals = np.frombuffer(reader.take(8 * n * dv, index), dtype="<f8").reshape(n, dv)
    labels = np.frombuffer(reader.take(4 * n, index), dtype="<u4")
    relations = np.frombuffer(reader.take(4 * m * 3, index), dtype="<u4").reshape(m, 3)
    record = reader.data[start:reader.pos]
    stored = reader.u32(index)
    if zlib.crc32(record) != stored:
        raise CorruptionError(
            f"{reader.path}: checksum mismatch in scene {index}",
            scene_index=index,
            path=reader.path,
        )
    return SceneInstance(
        boxes=boxes.astype(np.float64),
        visuals=visuals.astype(np.float64),
        labels=labels.astype(np.int64),
        relations=relations.astype(np.int64),
    )


def decode_dataset(data: bytes, path: Path | str = "<memory>") -> Dataset:
    """
    Parse ``SGDS`` bytes.

    Raises:
        FormatError: bad magic
        VersionError: unsupported container version
        CorruptionError: truncated or checksum-failing record
        DataError: decoded scenes violating their invariants
    """
    path = Path(path)
    magic = data[:4]
    if magic != DATASET_MAGIC:
        raise FormatError(
            f"{path}: not a dataset file",
            expected_magic=DATASET_MAGIC,
            found_magic=bytes(magic),
            path=path,
        )
    reader = _Reader(data, path)
    reader.pos = 4
    version = reader.u32(None)
    if version != DATASET_VERSION:
        raise VersionError(
            f"{path}: dataset version {version} is not supported",
            expected=DATASET_VERSION,
            found=version,
            path=path,
        )

    config_bytes = reader.take(reader.u32(None), None)
    try:
        config = GenConfig.model_validate_json(config_bytes)
    except ValidationError as e:
        raise CorruptionError(f"{path}: unreadable config header", path=path, cause=e) from e

    count = reader.u32(None)
    scenes: List[SceneInstance] = [_decode_scene(reader, i) for i in range(count)]
    if reader.pos != len(data):
        raise CorruptionError(
            f"{path}: {len(data) - reader.pos} trailing bytes after scene {count - 1}",
            scene_index=count - 1 if count else None,
            path=path,
        )

    for i, scene in enumerate(scenes):
        SceneValidator.validate(
            scene,
            config.num_object_classes,
            config.num_predicate_classes,
            config.visual_dim,
            scene_index=i,
        )
    return Dataset(config=config, scenes=scenes)


def load_dataset(path: Path) -> Dataset:
    """
    Read and validate a dataset file.

    Args:
        path: ``SGDS`` file

    Returns:
        Dataset

    Raises:
        DataError: missing file, or any decoding failure
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}", path=path)
    dataset = decode_dataset(path.read_bytes(), path)
    logger.info(f"Loaded {len(dataset)} scenes from {path}")
    return dataset


# ============================================================================
# DEBUG EXPORT
# ============================================================================

def scene_record(index: int, scene: SceneInstance, split: str) -> dict:
    """JSON-ready view of one scene."""
    return {
        "index": index,
        "split": split,
        "boxes": scene.boxes.tolist(),
        "labels": scene.labels.tolist(),
        "visuals": scene.visuals.tolist(),
        "relations": scene.relations.tolist(),
    }


def export_jsonl(dataset: Dataset, path: Path) -> Tuple[Path, int]:
    """
    Write one JSON object per scene for inspection.

    Returns:
        The written path and the number of lines
    """
    lines = [
        json.dumps(scene_record(i, s, "test" if dataset.is_test(i) else "train"))
        for i, s in enumerate(dataset.scenes)
    ]
    FileHelper.atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))
    return Path(path), len(lines)
