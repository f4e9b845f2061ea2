import math

import numpy as np
import pytest

from autodiff import Value, backward, softmax
from config.constants import ScheduleKind
from curriculum import (
    CurriculumState,
    ScheduleSpec,
    ce_loss,
    crw_loss,
    crw_loss_pairs,
    lambda_factor,
    phi,
)
from exceptions import ConfigurationError, ContractError

L = 1000


def _spec(kind, **kwargs):
    return ScheduleSpec(kind=kind, total_iters=L, **kwargs)


def _one_hot(c, width):
    y = np.zeros(width)
    y[c] = 1.0
    return y


# ============================================================================
# SCHEDULES
# ============================================================================

def test_linear_schedule():
    spec = _spec(ScheduleKind.LINEAR)
    assert phi(spec, 0) == 1.0
    assert phi(spec, L) == 0.0
    assert phi(spec, L / 2) == pytest.approx(0.5)


def test_exponential_schedule_ends_at_nu():
    spec = _spec(ScheduleKind.EXPONENTIAL, nu=0.1)
    assert phi(spec, 0) == 1.0
    assert phi(spec, L) == pytest.approx(0.1)


def test_cosine_schedule():
    spec = _spec(ScheduleKind.COSINE)
    assert phi(spec, 0) == 1.0
    assert phi(spec, L) == pytest.approx(0.0, abs=1e-12)
    assert phi(spec, L / 2) == pytest.approx(0.7071068, abs=1e-7)


@pytest.mark.parametrize("kind", list(ScheduleKind))
def test_schedules_are_non_increasing(kind):
    spec = _spec(kind)
    values = [phi(spec, l) for l in range(0, L + 1, 10)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_step_past_the_end_is_rejected():
    with pytest.raises(ContractError):
        phi(_spec(ScheduleKind.LINEAR), L + 1)


@pytest.mark.parametrize("kwargs", [{"nu": 1.0}, {"nu": 0.0}, {"alpha": 1.5}, {"total_iters": 0}])
def test_invalid_schedule_parameters(kwargs):
    with pytest.raises(ConfigurationError):
        ScheduleSpec(**kwargs)


# ============================================================================
# CURRICULUM FACTORS
# ============================================================================

def test_lambda_head_and_tail_classes():
    spec = _spec(ScheduleKind.LINEAR, alpha=0.25)
    head = {0, 1, 2}
    at_start = lambda_factor(spec, 0, head, 6)
    np.testing.assert_array_equal(at_start, np.ones(6))
    late = lambda_factor(spec, 0.9 * L, head, 6)
    np.testing.assert_allclose(late, [0.25, 0.25, 0.25, 1.0, 1.0, 1.0])


@pytest.mark.parametrize("kind", list(ScheduleKind))
def test_lambda_never_drops_below_alpha(kind):
    spec = _spec(kind, alpha=0.3)
    for l in range(0, L + 1, 50):
        lam = lambda_factor(spec, l, {0, 2}, 4)
        assert lam[[0, 2]].min() >= 0.3
        assert lam[1] == lam[3] == 1.0


def test_curriculum_state_tracks_steps():
    state = CurriculumState(spec=_spec(ScheduleKind.LINEAR), head_set=frozenset({0, 1}), num_classes=3)
    assert state.probe_value(1) == 1.0
    state.advance(L // 2)
    assert state.iter == L // 2
    assert state.probe_value(1) == pytest.approx(0.5)
    assert state.probe_value(2) == 1.0


def test_disabled_curriculum_keeps_unit_factors():
    state = CurriculumState(
        spec=_spec(ScheduleKind.LINEAR), head_set=frozenset({0, 1}), num_classes=3, enabled=False
    )
    np.testing.assert_array_equal(state.advance(L), np.ones(3))


# ============================================================================
# LOSSES
# ============================================================================

def test_ce_uniform_logits():
    assert ce_loss(Value(np.zeros(4)), _one_hot(2, 4)).item() == pytest.approx(math.log(4), abs=1e-12)


def test_ce_saturates():
    z = np.zeros(5)
    z[1] = 30.0
    assert ce_loss(Value(z), _one_hot(1, 5)).item() < 1e-12


def test_ce_matches_fsum_oracle():
    z = np.random.default_rng(0).normal(0.0, 2.0, size=6)
    m = max(z)
    expected = -(z[3] - m - math.log(math.fsum(math.exp(v - m) for v in z)))
    assert ce_loss(Value(z), _one_hot(3, 6)).item() == pytest.approx(expected, abs=1e-12)


def test_ce_rejects_non_one_hot():
    with pytest.raises(ContractError):
        ce_loss(Value(np.zeros(3)), np.array([0.5, 0.5, 0.0]))


def test_crw_reduces_to_ce_with_unit_factors():
    rng = np.random.default_rng(1)
    for _ in range(100):
        z = Value(rng.normal(0.0, 3.0, size=6))
        y = _one_hot(int(rng.integers(6)), 6)
        assert crw_loss(z, y, np.ones(6), np.ones(6)).item() == pytest.approx(ce_loss(z, y).item(), abs=1e-12)


def test_crw_scales_head_and_tail_labels():
    spec = _spec(ScheduleKind.LINEAR, alpha=0.25)
    lam = lambda_factor(spec, L, {0, 1}, 4)
    z = Value(np.random.default_rng(2).standard_normal(4))
    head_y, tail_y = _one_hot(1, 4), _one_hot(3, 4)
    weights = np.array([1.0, 1.0, 1.0, 2.5])
    assert crw_loss(z, head_y, weights, lam).item() == pytest.approx(0.25 * ce_loss(z, head_y).item())
    assert crw_loss(z, tail_y, weights, lam).item() == pytest.approx(2.5 * ce_loss(z, tail_y).item())


def test_crw_gradient_is_scaled_softmax_residual():
    rng = np.random.default_rng(3)
    z = Value(rng.standard_normal(5), requires_grad=True)
    y = _one_hot(2, 5)
    weights = rng.uniform(0.5, 2.0, size=5)
    lam = rng.uniform(0.25, 1.0, size=5)
    backward(crw_loss(z, y, weights, lam))
    expected = lam[2] * weights[2] * (softmax(z.detach()).data - y)
    np.testing.assert_allclose(z.grad, expected, atol=1e-10)


def test_pair_loss_is_mean_of_single_losses():
    rng = np.random.default_rng(4)
    z = rng.standard_normal((7, 5))
    labels = rng.integers(0, 5, size=7)
    weights = rng.uniform(0.5, 2.0, size=5)
    lam = rng.uniform(0.25, 1.0, size=5)
    singles = [crw_loss(Value(z[i]), _one_hot(labels[i], 5), weights, lam).item() for i in range(7)]
    pooled = crw_loss_pairs(Value(z), labels, weights, lam).item()
    assert pooled == pytest.approx(np.mean(singles), abs=1e-12)


def test_pair_loss_needs_pairs_and_valid_labels():
    with pytest.raises(ContractError):
        crw_loss_pairs(Value(np.zeros((0, 3))), [], np.ones(3), np.ones(3))
    with pytest.raises(ContractError):
        crw_loss_pairs(Value(np.zeros((1, 3))), [3], np.ones(3), np.ones(3))
