import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from autodiff import Value, backward
from conftest import make_scene
from config.constants import EMBEDDING_DIM, Weighting
from exceptions import ConfigurationError, ContractError, DataError, DimensionError
from stats import (
    EmbeddingTable,
    build_class_stats,
    build_frequency_bias,
    build_tables,
    class_balanced_weights,
    count_predicates,
    embed_argmax,
    embed_soft,
    load_word_vectors,
    select_head_set,
)
from stats.frequency import FrequencyBias


# ============================================================================
# COUNTS
# ============================================================================

def test_single_relation_counts():
    scene = make_scene([1, 2], [[0, 1, 3]])
    stats = count_predicates([scene], 5)
    expected = np.zeros(6, dtype=np.int64)
    expected[3] = 1
    expected[0] = scene.background_quota()
    np.testing.assert_array_equal(stats.counts, expected)
    assert stats.total == int(expected.sum())
    assert stats.head_set == frozenset({0})


def test_counts_double_on_concatenation(tiny_dataset):
    once = count_predicates(tiny_dataset.scenes, 5)
    twice = count_predicates(tiny_dataset.concatenated(tiny_dataset).scenes, 5)
    np.testing.assert_array_equal(twice.counts, 2 * once.counts)


def test_counts_match_independent_tally(tiny_dataset):
    stats = count_predicates(tiny_dataset)
    tally = [0] * 6
    for index, scene in enumerate(tiny_dataset.scenes):
        if tiny_dataset.is_test(index):
            continue
        for _, _, p in scene.triplets():
            tally[p] += 1
        tally[0] += scene.background_quota()
    assert stats.counts.tolist() == tally


def test_empty_dataset_is_a_data_error():
    with pytest.raises(DataError):
        count_predicates([], 5)


# ============================================================================
# CLASS-BALANCED WEIGHTS
# ============================================================================

def test_beta_zero_gives_unit_weights():
    np.testing.assert_array_equal(class_balanced_weights([5, 50, 500], 0.0), np.ones(3))


@pytest.mark.parametrize("beta", [0.5, 0.9, 0.9999])
def test_single_instance_classes_have_raw_weight_one(beta):
    np.testing.assert_allclose(class_balanced_weights([1, 1, 1], beta), np.ones(3), atol=1e-12)


def test_class_balanced_weights_match_decimal_oracle():
    getcontext().prec = 50
    beta = Decimal("0.99")
    raw = [(1 - beta) / (1 - beta ** n) for n in (100, 10, 1)]
    assert float(raw[0]) == pytest.approx(0.0157736, rel=1e-5)
    assert float(raw[1]) == pytest.approx(0.1045822, rel=1e-5)
    mean = sum(raw) / 3
    expected = [float(r / mean) for r in raw]
    np.testing.assert_allclose(class_balanced_weights([100, 10, 1], 0.99), expected, rtol=1e-12)


def test_weights_are_mean_normalized_and_zero_counts_keep_one():
    weights = class_balanced_weights([0, 400, 20, 3], 0.999)
    assert weights[0] == 1.0
    assert weights[1:].mean() == pytest.approx(1.0)
    assert weights[1] < weights[2] < weights[3]


@pytest.mark.parametrize("beta", [1.0, -0.1])
def test_beta_out_of_range(beta):
    with pytest.raises(ConfigurationError):
        class_balanced_weights([1, 2], beta)


# ============================================================================
# HEAD SET
# ============================================================================

def test_head_set_prefix_rule():
    assert select_head_set([0, 50, 30, 20], 0.5) == frozenset({0, 1})
    assert select_head_set([0, 50, 30, 20], 0.6) == frozenset({0, 1, 2})


def test_head_set_extremes():
    assert select_head_set([0, 50, 30, 20], 1.0) == frozenset({0, 1, 2, 3})
    assert select_head_set([0, 50, 30, 20], 0.0) == frozenset({0})


def test_full_share_takes_classes_without_instances():
    assert select_head_set([0, 50, 0, 20], 1.0) == frozenset({0, 1, 2, 3})
    assert select_head_set([0, 0, 0], 1.0) == frozenset({0, 1, 2})
    assert select_head_set([0, 50, 0, 20], 0.99) == frozenset({0, 1, 3})


def test_head_set_ties_prefer_smaller_index():
    assert select_head_set([0, 10, 40, 40, 10], 0.4) == frozenset({0, 2})


def test_build_class_stats_uniform_weighting(tiny_dataset):
    stats = build_class_stats(tiny_dataset, None, 0.999, 0.7, Weighting.UNIFORM)
    np.testing.assert_array_equal(stats.weights, np.ones(6))
    assert 0 in stats.head_set
    assert stats.tail_set() == frozenset(range(6)) - stats.head_set


# ============================================================================
# FREQUENCY BIAS
# ============================================================================

def test_unseen_pair_is_uniform():
    bias = build_frequency_bias([make_scene([1, 2], [[0, 1, 5]])], 10)
    np.testing.assert_allclose(bias.lookup(3, 3), np.full(11, math.log(1 / 11)))


def test_smoothed_ratio_for_a_repeated_pair():
    scenes = [make_scene([1, 2], [[0, 1, 5]], seed=i) for i in range(100)]
    bias = build_frequency_bias(scenes, 10, smoothing=1e-3, include_background=False)
    row = bias.lookup(1, 2)
    assert row[5] == pytest.approx(math.log(100.001 / 100.011), rel=1e-9)
    assert row[5] == pytest.approx(-1.0e-4, rel=1e-3)
    others = np.delete(row, 5)
    np.testing.assert_allclose(others, np.full(10, math.log(0.001 / 100.011)), rtol=1e-12)


def test_background_counts_unannotated_pairs():
    bias = build_frequency_bias([make_scene([1, 2], [[0, 1, 5]])], 10, include_background=True)
    reverse = bias.lookup(2, 1)
    assert int(np.argmax(reverse)) == 0


def test_frequency_bias_dense_round_trip():
    scenes = [make_scene([1, 2, 3], [[0, 1, 2], [2, 0, 4]], seed=s) for s in range(5)]
    bias = build_frequency_bias(scenes, 5)
    restored = FrequencyBias.from_dense(bias.dense(3), bias.observed_mask(3))
    assert set(restored.table) == set(bias.table)
    for pair, row in bias.table.items():
        np.testing.assert_array_equal(restored.table[pair], row)


def test_smoothing_must_be_positive():
    with pytest.raises(ConfigurationError):
        build_frequency_bias([], 5, smoothing=0.0)


# ============================================================================
# EMBEDDINGS
# ============================================================================

def test_table_is_read_only():
    table = EmbeddingTable.random(4, seed=1)
    assert table.frozen
    with pytest.raises(ValueError):
        table.rows[0, 0] = 1.0


def test_table_width_is_fixed():
    with pytest.raises(DimensionError):
        EmbeddingTable(rows=np.zeros((3, 10)))


def test_embed_soft_one_hot_and_uniform():
    table = EmbeddingTable.random(6, seed=2)
    one_hot = np.zeros(6)
    one_hot[4] = 1.0
    np.testing.assert_array_equal(embed_soft(Value(one_hot), table).data, table.rows[4])
    np.testing.assert_allclose(
        embed_soft(Value(np.full(6, 1 / 6)), table).data, table.rows.mean(axis=0), atol=1e-12
    )


def test_embed_soft_matches_weighted_sum_and_is_differentiable():
    rng = np.random.default_rng(3)
    table = EmbeddingTable.random(6, seed=3)
    prob = rng.random(6)
    prob /= prob.sum()
    expected = np.zeros(EMBEDDING_DIM)
    for c in range(6):
        expected += prob[c] * table.rows[c]
    p = Value(prob, requires_grad=True)
    out = embed_soft(p, table)
    np.testing.assert_allclose(out.data, expected, atol=1e-12)
    backward(out.sum())
    np.testing.assert_allclose(p.grad, table.rows.sum(axis=1), atol=1e-12)


def test_embed_soft_rejects_non_distribution():
    table = EmbeddingTable.random(3, seed=4)
    with pytest.raises(ContractError):
        embed_soft(Value([0.5, 0.6, 0.0]), table)


def test_embed_argmax_takes_most_probable_row():
    table = EmbeddingTable.random(3, seed=5)
    out = embed_argmax(Value([[0.2, 0.7, 0.1], [0.6, 0.3, 0.1]]), table)
    np.testing.assert_array_equal(out.data, table.rows[[1, 0]])
    assert not out.requires_grad


def test_word_vectors_fill_matching_rows(tmp_path):
    path = tmp_path / "vectors.txt"
    vec = np.linspace(-1.0, 1.0, EMBEDDING_DIM)
    path.write_text("object_2 " + " ".join(repr(v) for v in vec) + "\n", encoding="utf-8")
    objects, predicates = build_tables(3, 4, seed=0, path=path)
    np.testing.assert_array_equal(objects.rows[2], vec)
    random_objects, _ = build_tables(3, 4, seed=0)
    np.testing.assert_array_equal(objects.rows[1], random_objects.rows[1])
    assert predicates.vocab_size == 5


def test_word_vectors_reject_short_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("object_1 0.1 0.2\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_word_vectors(path)
