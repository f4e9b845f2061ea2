import json
import struct

import numpy as np
import pytest
from pydantic import ValidationError

from config.constants import DATASET_MAGIC
from dataset import (
    GenConfig,
    decode_dataset,
    encode_dataset,
    export_jsonl,
    gen_dataset,
    load_dataset,
    save_dataset,
    tail_classes,
    zipf_frequencies,
)
from exceptions import ConfigurationError, CorruptionError, DataError, FormatError, VersionError
from utils.validators import SceneValidator


@pytest.fixture(scope="module")
def zipf_dataset():
    return gen_dataset(GenConfig(num_scenes=2000, num_predicate_classes=20, zipf_s=1.5, seed=7))


# ============================================================================
# GENERATION
# ============================================================================

def test_generation_is_deterministic(tiny_gen):
    assert gen_dataset(tiny_gen).same_as(gen_dataset(tiny_gen))


def test_different_seeds_differ(tiny_gen):
    other = tiny_gen.model_copy(update={"seed": tiny_gen.seed + 1})
    assert not gen_dataset(tiny_gen).same_as(gen_dataset(other))


def test_zipf_target_is_normalized_and_decreasing():
    freqs = zipf_frequencies(20, 1.5)
    assert freqs.sum() == pytest.approx(1.0)
    assert np.all(np.diff(freqs) < 0)


def test_rank_frequency_slope_follows_zipf(zipf_dataset):
    counts = np.zeros(21)
    for scene in zipf_dataset:
        for _, _, p in scene.triplets():
            counts[p] += 1
    ranks = np.arange(1, 21)
    present = counts[1:] > 0
    slope = np.polyfit(np.log(ranks[present]), np.log(counts[1:][present]), 1)[0]
    assert -1.5 * 1.15 <= slope <= -1.5 * 0.85


def test_every_generated_scene_is_valid(zipf_dataset):
    cfg = zipf_dataset.config
    for scene in zipf_dataset:
        assert SceneValidator.problems(scene, cfg.num_object_classes, cfg.num_predicate_classes, cfg.visual_dim) == []
        assert cfg.objects_min <= scene.num_objects <= cfg.objects_max
        assert scene.num_relations <= cfg.relations_max


def test_split_is_disjoint_and_roughly_four_to_one(zipf_dataset):
    train, test = set(zipf_dataset.train_indices()), set(zipf_dataset.test_indices())
    assert not train & test
    assert train | test == set(range(len(zipf_dataset)))
    assert 0.15 < len(test) / len(zipf_dataset) < 0.25
    assert zipf_dataset.test_indices() == gen_dataset(zipf_dataset.config).test_indices()


def test_tail_classes_appear_in_the_test_split(zipf_dataset):
    seen = {p for scene in zipf_dataset.test_scenes() for _, _, p in scene.triplets()}
    assert set(tail_classes(zipf_dataset.config)) <= seen


def test_tail_classes_are_the_bottom_half():
    assert tail_classes(GenConfig(num_predicate_classes=20)) == list(range(11, 21))
    assert tail_classes(GenConfig(num_predicate_classes=5)) == [4, 5]


def test_invalid_ranges_are_rejected():
    with pytest.raises(ValidationError):
        GenConfig(objects_min=6, objects_max=4)
    with pytest.raises(ValidationError):
        GenConfig(relations_min=3, relations_max=2)
    bad = GenConfig.model_construct(**{**GenConfig().model_dump(), "objects_min": 6, "objects_max": 4})
    with pytest.raises(ConfigurationError):
        gen_dataset(bad)


# ============================================================================
# FILE FORMAT
# ============================================================================

def test_round_trip_is_bitwise(tmp_path, tiny_gen):
    dataset = gen_dataset(tiny_gen.model_copy(update={"num_scenes": 50}))
    path = save_dataset(dataset, tmp_path / "data.sgds")
    assert load_dataset(path).same_as(dataset)


def test_bad_magic_is_a_format_error(tiny_dataset):
    data = b"XXXX" + encode_dataset(tiny_dataset)[4:]
    with pytest.raises(FormatError):
        decode_dataset(data)


def test_unknown_version(tiny_dataset):
    data = bytearray(encode_dataset(tiny_dataset))
    data[4:8] = struct.pack("<I", 99)
    with pytest.raises(VersionError):
        decode_dataset(bytes(data))


def test_truncation_names_the_scene(tiny_dataset):
    data = encode_dataset(tiny_dataset)
    with pytest.raises(CorruptionError) as info:
        decode_dataset(data[:-10])
    assert info.value.scene_index == len(tiny_dataset) - 1


def test_flipped_byte_fails_the_scene_checksum(tiny_dataset):
    data = bytearray(encode_dataset(tiny_dataset))
    config_len = struct.unpack("<I", data[8:12])[0]
    first_scene = 12 + config_len + 4
    data[first_scene + 12 + 3] ^= 0xFF
    with pytest.raises(CorruptionError) as info:
        decode_dataset(bytes(data))
    assert info.value.scene_index == 0


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope.sgds")


def test_header_starts_with_magic(tiny_dataset):
    assert encode_dataset(tiny_dataset)[:4] == DATASET_MAGIC


def test_jsonl_export(tmp_path, tiny_dataset):
    path, count = export_jsonl(tiny_dataset, tmp_path / "scenes.jsonl")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert count == len(lines) == len(tiny_dataset)
    first = json.loads(lines[0])
    assert first["index"] == 0
    assert first["split"] in ("train", "test")
    assert len(first["labels"]) == tiny_dataset.scenes[0].num_objects
