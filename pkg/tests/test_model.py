import math
from dataclasses import replace

import numpy as np
import pytest

from autodiff import Value, backward, check_gradients
from config.constants import BACKGROUND, PredicateEmbedding, RunMode
from conftest import make_scene
from exceptions import NumericError
from harness import evaluator
from harness.trainer import Trainer
from model import ForwardOptions, init_params
from model.features import pair_feature_dim, pair_features
from model.predictor import (
    base_logits,
    batch_objective,
    forward_pairs,
    forward_scene,
    total_loss,
    training_pairs,
)
from stats import build_class_stats, build_frequency_bias


@pytest.fixture
def scene():
    return make_scene([1, 2, 3, 2], [[0, 1, 2], [2, 3, 5]], seed=4)


@pytest.fixture
def params(tiny_cfg):
    return init_params(tiny_cfg)


# ============================================================================
# FEATURES AND PAIRS
# ============================================================================

def test_pair_features_width(scene, params):
    features = pair_features(scene, scene.ordered_pairs(), params.object_table)
    assert features.shape == (12, pair_feature_dim(4))
    assert np.all(np.isfinite(features))


def test_training_pairs_put_annotations_first(scene):
    pairs, labels = training_pairs(scene, np.random.default_rng(0), neg_ratio=3, max_pairs=64)
    assert pairs[:2] == [(0, 1), (2, 3)]
    assert labels[:2].tolist() == [2, 5]
    negatives = pairs[2:]
    assert len(negatives) == scene.background_quota(3, 64) == 6
    assert len(set(negatives)) == len(negatives)
    assert not set(negatives) & scene.relation_pairs()
    assert np.all(labels[2:] == BACKGROUND)


def test_training_pairs_respect_the_cap(scene):
    pairs, labels = training_pairs(scene, np.random.default_rng(0), neg_ratio=3, max_pairs=3)
    assert len(pairs) == 3
    assert labels.tolist() == [2, 5, BACKGROUND]


# ============================================================================
# FORWARD
# ============================================================================

def test_eval_mode_scores_every_ordered_pair(scene, params, tiny_cfg):
    options = ForwardOptions.from_config(tiny_cfg, RunMode.EVAL)
    prediction, loss = forward_scene(scene, params, None, RunMode.EVAL, options)
    assert loss is None
    assert prediction.num_pairs == 12
    assert prediction.logits.shape == (12, 6)
    np.testing.assert_allclose(prediction.probs.sum(axis=1), np.ones(12), atol=1e-12)


def test_scene_with_one_object_is_skipped(params, tiny_cfg):
    lonely = make_scene([1], [])
    prediction, loss = forward_scene(lonely, params, None, RunMode.EVAL, ForwardOptions.from_config(tiny_cfg))
    assert prediction.skipped and prediction.num_pairs == 0 and loss is None


def test_same_seed_gives_identical_logits(scene, tiny_cfg):
    options = ForwardOptions.from_config(tiny_cfg, RunMode.EVAL)
    a, _ = forward_scene(scene, init_params(tiny_cfg), None, RunMode.EVAL, options)
    b, _ = forward_scene(scene, init_params(tiny_cfg), None, RunMode.EVAL, options)
    assert a.logits.tobytes() == b.logits.tobytes()
    c, _ = forward_scene(scene, init_params(tiny_cfg, seed=99), None, RunMode.EVAL, options)
    assert not np.array_equal(a.logits, c.logits)


def test_frequency_bias_is_added_to_base_logits(scene, tiny_cfg):
    bias = build_frequency_bias([scene], 5)
    params = init_params(tiny_cfg, freq_bias=bias)
    pairs = scene.ordered_pairs()
    with_bias, rows = base_logits(scene, pairs, params, use_bias=True)
    without, zeros = base_logits(scene, pairs, params, use_bias=False)
    np.testing.assert_array_equal(zeros, np.zeros_like(zeros))
    labels = scene.labels
    expected = bias.lookup_many([labels[s] for s, _ in pairs], [labels[o] for _, o in pairs])
    np.testing.assert_allclose(rows, expected)
    np.testing.assert_allclose(with_bias.data - without.data, expected, atol=1e-12)


def test_scm_off_leaves_base_logits(scene, make_cfg):
    cfg = make_cfg(scm={"enabled": False})
    params = init_params(cfg)
    assert params.scm is None
    pairs = scene.ordered_pairs()
    z, z_prime, _, _ = forward_pairs(scene, pairs, params, ForwardOptions.from_config(cfg))
    assert z is z_prime


def test_train_losses_are_finite_and_non_negative(scene, params, tiny_cfg):
    stats = build_class_stats([scene], 5, 0.999, 0.7)
    options = ForwardOptions.from_config(tiny_cfg)
    _, loss = forward_scene(scene, params, stats, RunMode.TRAIN, options, np.ones(6), np.random.default_rng(1))
    assert np.isfinite(loss.crw.item()) and loss.crw.item() >= 0.0
    assert loss.sc is not None
    assert np.isfinite(loss.sc.item()) and loss.sc.item() >= 0.0


def test_scene_without_relations_has_no_consistency_loss(params, tiny_cfg):
    empty = make_scene([1, 2, 3], [])
    options = ForwardOptions.from_config(tiny_cfg)
    _, loss = forward_scene(empty, params, None, RunMode.TRAIN, options, None, np.random.default_rng(2))
    assert loss.sc is None
    assert loss.num_pairs == empty.background_quota()


def _random_scene(rng, seed):
    n = int(rng.integers(2, 5))
    ordered = [(s, o) for s in range(n) for o in range(n) if s != o]
    chosen = rng.choice(len(ordered), size=int(rng.integers(1, 3)), replace=False)
    relations = [(*ordered[i], int(rng.integers(1, 6))) for i in chosen]
    return make_scene(rng.integers(1, 5, size=n).tolist(), relations, seed=seed)


def _gradient_case(seed, make_cfg):
    rng = np.random.default_rng(seed)
    cfg = make_cfg(scm={"d_model": 16, "heads": 2, "layers": 1})
    scene = _random_scene(rng, seed)
    params = init_params(cfg, freq_bias=build_frequency_bias([scene], 5), seed=seed)
    options = ForwardOptions.from_config(cfg)
    pairs, labels = training_pairs(scene, rng, options.neg_ratio, options.max_pairs)
    stats = replace(build_class_stats([scene], 5, 0.999, 0.7), weights=rng.uniform(0.2, 2.0, size=6))
    lam = rng.uniform(0.1, 1.0, size=6)

    def build_loss():
        _, _, _, loss = forward_pairs(scene, pairs, params, options, labels, stats, lam)
        return total_loss(loss.crw, loss.sc, options.scm_enabled)

    return build_loss, params, rng


@pytest.mark.parametrize("seed", range(20))
def test_total_loss_gradients_match_finite_differences(seed, make_cfg):
    build_loss, params, rng = _gradient_case(seed, make_cfg)
    result = check_gradients(build_loss, params.named(), max_entries_per_param=12, rng=rng)
    assert result.checked >= len(params.named())
    assert result.passed(1e-4), result


@pytest.mark.slow
def test_total_loss_gradients_on_every_entry(make_cfg):
    build_loss, params, _ = _gradient_case(0, make_cfg)
    result = check_gradients(build_loss, params.named())
    assert result.checked == sum(p.data.size for p in params.named().values())
    assert result.passed(1e-4), result


@pytest.mark.parametrize("embedding, flows", [(PredicateEmbedding.SOFT, True), (PredicateEmbedding.ARGMAX, False)])
def test_consistency_gradient_reaches_base_logits_through_soft_embedding(scene, make_cfg, embedding, flows):
    cfg = make_cfg(scm={"predicate_embedding": embedding.value})
    params = init_params(cfg)
    options = ForwardOptions.from_config(cfg)
    pairs, labels = training_pairs(scene, np.random.default_rng(7), options.neg_ratio, options.max_pairs)
    _, z_prime, _, loss = forward_pairs(scene, pairs, params, options, labels)
    assert loss.sc is not None
    backward(loss.sc)
    if flows:
        assert np.any(z_prime.grad != 0.0)
    else:
        assert z_prime.grad is None or not np.any(z_prime.grad)


# ============================================================================
# OBJECTIVE
# ============================================================================

def test_total_loss_is_a_plain_sum():
    assert total_loss(Value(1.5), Value(0.25), True).item() == pytest.approx(1.75)
    assert total_loss(Value(0.0), Value(0.0), True).item() == 0.0


def test_total_loss_without_scm_is_the_reweighted_loss():
    crw = Value(1.5)
    assert total_loss(crw, Value(0.25), False) is crw
    assert total_loss(crw, None, True) is crw


def test_batch_objective_averages_scenes(tiny_dataset, tiny_cfg):
    params = init_params(tiny_cfg)
    stats = build_class_stats(tiny_dataset, None, 0.999, 0.7)
    options = ForwardOptions.from_config(tiny_cfg)
    scenes = tiny_dataset.train_scenes()[:3]
    objective = batch_objective(scenes, params, stats, options, np.ones(6), np.random.default_rng(5))
    assert objective.scenes == 3
    assert objective.sc_scenes == sum(1 for s in scenes if s.num_relations)
    assert objective.total.item() == pytest.approx(objective.crw.item() + objective.sc.item())


def test_argmax_predicate_embedding_gives_a_finite_loss(scene, make_cfg):
    cfg = make_cfg(scm={"predicate_embedding": PredicateEmbedding.ARGMAX.value})
    params = init_params(cfg)
    stats = build_class_stats([scene], 5, 0.999, 0.7)
    options = ForwardOptions.from_config(cfg)
    assert options.predicate_embedding == PredicateEmbedding.ARGMAX
    _, loss = forward_scene(scene, params, stats, RunMode.TRAIN, options, np.ones(6), np.random.default_rng(6))
    assert np.isfinite(total_loss(loss.crw, loss.sc, True).item())


def _plain_cross_entropy(logits, labels):
    losses = []
    for row, label in zip(logits, labels):
        top = max(row)
        log_total = top + math.log(math.fsum(math.exp(v - top) for v in row))
        losses.append(log_total - row[label])
    return math.fsum(losses) / len(losses)


def test_plain_training_step_is_the_mean_cross_entropy(tiny_dataset, make_cfg, tmp_path):
    cfg = make_cfg(crm={"enabled": False, "weighting": "uniform"}, scm={"enabled": False})
    trainer = Trainer(cfg, tiny_dataset, tmp_path)
    np.testing.assert_array_equal(trainer.stats.weights, np.ones(6))
    batch = trainer.next_batch()

    rng = trainer.pair_rng(1)
    expected = []
    for scene in tiny_dataset.subset(batch):
        if scene.num_objects < 2:
            continue
        pairs, labels = training_pairs(scene, rng, trainer.options.neg_ratio, trainer.options.max_pairs)
        z, _, _, _ = forward_pairs(scene, pairs, trainer.params, trainer.options)
        expected.append(_plain_cross_entropy(z.numpy().tolist(), labels.tolist()))

    objective = trainer.step(1, batch)
    np.testing.assert_array_equal(trainer.curriculum.lam, np.ones(6))
    assert objective.sc is None
    assert objective.total.item() == pytest.approx(math.fsum(expected) / len(expected), abs=1e-10)


# ============================================================================
# EVALUATION
# ============================================================================

def test_evaluation_rejects_rows_that_do_not_sum_to_one(tiny_dataset, tiny_cfg, monkeypatch):
    params = init_params(tiny_cfg)
    options = ForwardOptions.from_config(tiny_cfg, RunMode.EVAL)
    predictions = evaluator.predict_scenes(params, tiny_dataset.test_scenes(), options)
    assert evaluator.probability_check(predictions)
    evaluator.evaluate_split(params, tiny_dataset, tiny_cfg)

    broken = [replace(p, probs=p.probs * 2.0) for p in predictions]
    assert not evaluator.probability_check(broken)
    monkeypatch.setattr(evaluator, "predict_scenes", lambda *args: broken)
    with pytest.raises(NumericError):
        evaluator.evaluate_split(params, tiny_dataset, tiny_cfg)
