import math

import numpy as np
import pytest

from autodiff import (
    AttentionParams,
    OptState,
    Value,
    backward,
    check_gradients,
    concat,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    multi_head_attention,
    relative_error,
    sgd_step,
    softmax,
)
from autodiff.init import ones, xavier_uniform, zeros
from exceptions import ConfigurationError, ContractError, DimensionError, NumericError


def _attention(rng, d_model, heads):
    def w(name):
        return xavier_uniform(rng, d_model, d_model, name)

    def b(name):
        return Value(rng.normal(0.0, 0.1, size=d_model), requires_grad=True, name=name)

    return AttentionParams(
        wq=w("wq"), bq=b("bq"), wk=w("wk"), bk=b("bk"),
        wv=w("wv"), bv=b("bv"), wo=w("wo"), bo=b("bo"),
        heads=heads,
    )


# ============================================================================
# MATMUL
# ============================================================================

def test_matmul_identity_and_zero():
    a = np.random.default_rng(0).standard_normal((3, 3))
    np.testing.assert_array_equal(matmul(Value(a), Value(np.eye(3))).data, a)
    np.testing.assert_array_equal(matmul(Value(a), Value(np.zeros((3, 2)))).data, np.zeros((3, 2)))


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
    expected = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            expected[i, j] = sum(a[i, k] * b[k, j] for k in range(4))
    np.testing.assert_allclose(matmul(Value(a), Value(b)).data, expected, atol=1e-12)


def test_matmul_inner_dimension_mismatch():
    with pytest.raises(DimensionError):
        matmul(Value(np.ones((2, 3))), Value(np.ones((2, 3))))


def test_matmul_backward():
    rng = np.random.default_rng(2)
    a = Value(rng.standard_normal((3, 4)), requires_grad=True)
    b = Value(rng.standard_normal((4, 2)), requires_grad=True)
    backward(matmul(a, b).sum())
    np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((3, 2)))


# ============================================================================
# SOFTMAX FAMILY
# ============================================================================

def test_log_softmax_uniform():
    out = log_softmax(Value(np.zeros(4)))
    np.testing.assert_allclose(out.data, np.full(4, -math.log(4)), atol=1e-12)


def test_log_softmax_matches_fsum_oracle():
    z = np.random.default_rng(3).normal(0.0, 3.0, size=6)
    m = max(z)
    lse = m + math.log(math.fsum(math.exp(v - m) for v in z))
    np.testing.assert_allclose(log_softmax(Value(z)).data, z - lse, atol=1e-12)


def test_log_softmax_is_shift_invariant_and_large_logits_stay_finite():
    z = np.array([1000.0, 1001.0, 999.0])
    np.testing.assert_allclose(log_softmax(Value(z)).data, log_softmax(Value(z - 1000.0)).data, atol=1e-12)


def test_softmax_rows_sum_to_one_along_axis():
    z = np.random.default_rng(4).standard_normal((5, 7))
    np.testing.assert_allclose(softmax(Value(z), axis=-1).data.sum(axis=1), np.ones(5), atol=1e-12)
    np.testing.assert_allclose(softmax(Value(z), axis=0).data.sum(axis=0), np.ones(7), atol=1e-12)


def test_log_softmax_gradient_is_one_hot_minus_softmax():
    z = Value(np.random.default_rng(5).standard_normal(5), requires_grad=True)
    backward(log_softmax(z)[2])
    expected = -softmax(z.detach()).data
    expected[2] += 1.0
    np.testing.assert_allclose(z.grad, expected, atol=1e-12)


# ============================================================================
# LAYER NORM
# ============================================================================

def test_layer_norm_constant_row_maps_to_zero():
    out = layer_norm(Value(np.full((1, 6), 3.0)), Value(np.ones(6)), Value(np.zeros(6)))
    np.testing.assert_allclose(out.data, np.zeros((1, 6)), atol=1e-12)


def test_layer_norm_standardizes_rows():
    x = np.random.default_rng(6).normal(2.0, 5.0, size=(4, 10))
    out = layer_norm(Value(x), Value(np.ones(10)), Value(np.zeros(10))).data
    np.testing.assert_allclose(out.mean(axis=1), np.zeros(4), atol=1e-10)
    np.testing.assert_allclose(out.var(axis=1), np.ones(4), atol=1e-4)


def test_layer_norm_matches_two_pass_formula():
    rng = np.random.default_rng(7)
    x, gain, bias = rng.standard_normal((3, 8)), rng.standard_normal(8), rng.standard_normal(8)
    expected = np.zeros_like(x)
    for i, row in enumerate(x):
        mu = sum(row) / 8
        var = sum((v - mu) ** 2 for v in row) / 8
        expected[i] = (row - mu) / math.sqrt(var + 1e-5) * gain + bias
    out = layer_norm(Value(x), Value(gain), Value(bias))
    np.testing.assert_allclose(out.data, expected, atol=1e-10)


def test_layer_norm_rejects_width_one():
    with pytest.raises(DimensionError):
        layer_norm(Value(np.ones((2, 1))), Value(np.ones(1)), Value(np.zeros(1)))


# ============================================================================
# ATTENTION
# ============================================================================

def test_attention_single_row_returns_value_projection():
    rng = np.random.default_rng(8)
    params = _attention(rng, 4, 2)
    x = Value(rng.standard_normal((1, 4)))
    out, weights = multi_head_attention(x, params, return_weights=True)
    for w in weights:
        np.testing.assert_allclose(w, [[1.0]])
    expected = linear(linear(x, params.wv, params.bv), params.wo, params.bo)
    np.testing.assert_allclose(out.data, expected.data, atol=1e-12)


def test_attention_identical_rows_give_uniform_weights():
    rng = np.random.default_rng(9)
    params = _attention(rng, 6, 3)
    x = Value(np.tile(rng.standard_normal(6), (5, 1)))
    _, weights = multi_head_attention(x, params, return_weights=True)
    for w in weights:
        np.testing.assert_allclose(w, np.full((5, 5), 0.2), atol=1e-12)


def test_attention_matches_unvectorized_reference():
    rng = np.random.default_rng(10)
    params = _attention(rng, 8, 2)
    x = rng.standard_normal((4, 8))
    q = x @ params.wq.data + params.bq.data
    k = x @ params.wk.data + params.bk.data
    v = x @ params.wv.data + params.bv.data
    heads = []
    for h in range(2):
        cols = slice(4 * h, 4 * h + 4)
        head = np.zeros((4, 4))
        for i in range(4):
            scores = np.array([q[i, cols] @ k[j, cols] / 2.0 for j in range(4)])
            weights = np.exp(scores - scores.max())
            weights /= weights.sum()
            head[i] = sum(weights[j] * v[j, cols] for j in range(4))
        heads.append(head)
    expected = np.concatenate(heads, axis=1) @ params.wo.data + params.bo.data
    np.testing.assert_allclose(multi_head_attention(Value(x), params).data, expected, atol=1e-10)


def test_attention_head_count_must_divide_width():
    rng = np.random.default_rng(11)
    params = _attention(rng, 6, 4)
    with pytest.raises(ConfigurationError):
        multi_head_attention(Value(np.ones((2, 6))), params)


# ============================================================================
# BACKWARD
# ============================================================================

def test_backward_square():
    x = Value(3.0, requires_grad=True)
    backward(x * x)
    assert x.grad == pytest.approx(6.0)


def test_backward_fan_out_accumulates():
    x = Value(1.5, requires_grad=True)
    backward(x + x)
    assert x.grad == pytest.approx(2.0)


def test_backward_requires_scalar():
    x = Value(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(x * 2.0)


def test_concat_routes_gradients_back():
    a = Value(np.ones((2, 3)), requires_grad=True)
    b = Value(np.ones((1, 3)), requires_grad=True)
    out = concat([a, b], axis=0)
    backward((out * np.arange(9.0).reshape(3, 3)).sum())
    np.testing.assert_array_equal(a.grad, np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(b.grad, np.arange(6.0, 9.0).reshape(1, 3))


def test_non_finite_results_raise_numeric_error():
    with pytest.raises(NumericError) as info:
        Value(0.0, requires_grad=True).log()
    assert info.value.op == "log"
    with pytest.raises(NumericError):
        Value([1.0, np.nan])


# ============================================================================
# OPTIMIZER
# ============================================================================

def test_sgd_plain_step():
    p = Value([1.0], requires_grad=True)
    p.grad = np.array([0.5])
    sgd_step({"p": p}, OptState(), lr=0.1, momentum=0.0)
    assert p.data[0] == pytest.approx(0.95)
    assert p.grad[0] == 0.0


def test_sgd_momentum_recurrence():
    p = Value([0.0], requires_grad=True)
    opt = OptState()
    p.grad = np.array([1.0])
    sgd_step({"p": p}, opt, lr=0.1, momentum=0.9)
    assert p.data[0] == pytest.approx(-0.1)
    p.grad = np.array([1.0])
    sgd_step({"p": p}, opt, lr=0.1, momentum=0.9)
    assert opt.velocity["p"][0] == pytest.approx(1.9)
    assert p.data[0] == pytest.approx(-0.29)
    assert opt.step_count == 2


def test_sgd_clips_global_norm():
    p = Value([0.0, 0.0], requires_grad=True)
    p.grad = np.array([30.0, 40.0])
    norm = sgd_step({"p": p}, OptState(), lr=1.0, momentum=0.0, clip_norm=5.0)
    assert norm == pytest.approx(50.0)
    np.testing.assert_allclose(p.data, [-3.0, -4.0])


@pytest.mark.parametrize("lr", [0.0, -0.1])
def test_sgd_rejects_non_positive_lr(lr):
    p = Value([1.0], requires_grad=True)
    with pytest.raises(ConfigurationError):
        sgd_step({"p": p}, OptState(), lr=lr)


# ============================================================================
# FINITE DIFFERENCES
# ============================================================================

def test_relative_error_floor():
    assert relative_error(1e-6, 0.0) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(20))
def test_gradcheck_mlp_with_layer_norm(seed):
    rng = np.random.default_rng(seed)
    x = Value(rng.standard_normal((3, 5)))
    params = {
        "w1": xavier_uniform(rng, 5, 6, "w1"),
        "b1": Value(rng.normal(0.0, 0.1, size=6), requires_grad=True),
        "gain": ones(6, "gain"),
        "bias": zeros(6, "bias"),
        "w2": xavier_uniform(rng, 6, 4, "w2"),
    }
    labels = rng.integers(0, 4, size=3)

    def build_loss():
        h = linear(x, params["w1"], params["b1"]).tanh()
        h = layer_norm(h, params["gain"], params["bias"]).gelu()
        logp = log_softmax(h @ params["w2"], axis=-1)
        return -logp[np.arange(3), labels].mean()

    result = check_gradients(build_loss, params)
    assert result.checked == sum(p.size for p in params.values())
    assert result.passed(1e-4), result


def test_gradcheck_attention():
    rng = np.random.default_rng(99)
    attention = _attention(rng, 4, 2)
    x = Value(rng.standard_normal((3, 4)))
    target = rng.standard_normal((3, 4))
    params = {name: getattr(attention, name) for name in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}

    def build_loss():
        diff = multi_head_attention(x, attention) - target
        return (diff * diff).mean()

    assert check_gradients(build_loss, params).passed(1e-4)
