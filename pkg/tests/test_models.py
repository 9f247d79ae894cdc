"""Core math: parameter sets, exact gradients, clipping, SGD."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqdp.models import (
    ModelSpec,
    ParamSet,
    ShapeMismatchError,
    clip_gradient_l1,
    init_params,
    l1_norm,
    loss_and_grad,
    predict,
    predict_proba,
    sgd_step,
)

LOGISTIC = ModelSpec("logistic", input_dim=2, num_classes=3)
MLP = ModelSpec("mlp", input_dim=3, num_classes=3, hidden_dim=4)


def random_instance(spec, rng, n=6):
    params = init_params(spec, rng)
    x = rng.standard_normal((n, spec.input_dim))
    y = rng.integers(0, spec.num_classes, size=n)
    return params, x, y


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("perceptron", 2, 3)
    with pytest.raises(ValueError):
        ModelSpec("logistic", 0, 3)
    with pytest.raises(ValueError):
        ModelSpec("logistic", 2, 1)
    with pytest.raises(ValueError):
        ModelSpec("mlp", 2, 3, hidden_dim=0)


def test_paramset_rejects_non_finite():
    with pytest.raises(ValueError):
        ParamSet({"w": np.array([1.0, np.nan])})
    with pytest.raises(ValueError):
        ParamSet({"w": np.array([np.inf])})


def test_paramset_arithmetic_and_conformability():
    a = ParamSet({"w": np.array([1.0, 2.0]), "b": np.array([3.0])})
    b = ParamSet({"w": np.array([10.0, 20.0]), "b": np.array([30.0])})
    s = a + b
    assert np.array_equal(s["w"], [11.0, 22.0]) and np.array_equal(s["b"], [33.0])
    d = b - a
    assert np.array_equal(d["w"], [9.0, 18.0])
    assert np.array_equal(a.scale(2.0)["w"], [2.0, 4.0])
    with pytest.raises(ShapeMismatchError):
        a + ParamSet({"w": np.array([1.0, 2.0, 3.0]), "b": np.array([3.0])})
    with pytest.raises(ShapeMismatchError):
        a + ParamSet({"w": np.array([1.0, 2.0])})


def test_init_logistic_tensors():
    params = init_params(LOGISTIC, np.random.default_rng(0))
    assert params.names == ("w", "b")
    assert params["w"].shape == (3, 2)
    assert params["b"].shape == (3,)
    assert np.all(params["b"] == 0.0)
    limit = 1.0 / math.sqrt(2)
    assert np.all(np.abs(params["w"]) <= limit)


def test_init_mlp_tensors():
    params = init_params(MLP, np.random.default_rng(0))
    assert params.names == ("w1", "b1", "w2", "b2")
    assert params["w1"].shape == (4, 3)
    assert params["b1"].shape == (4,)
    assert params["w2"].shape == (3, 4)
    assert params["b2"].shape == (3,)
    assert np.all(params["b1"] == 0.0) and np.all(params["b2"] == 0.0)
    assert np.all(np.abs(params["w1"]) <= 1.0 / math.sqrt(3))
    assert np.all(np.abs(params["w2"]) <= 1.0 / math.sqrt(4))


def test_init_deterministic_and_roughly_centered():
    a = init_params(MLP, np.random.default_rng(7))
    b = init_params(MLP, np.random.default_rng(7))
    for name in a.names:
        assert np.array_equal(a[name], b[name])
    big = ModelSpec("logistic", input_dim=400, num_classes=10)
    w = init_params(big, np.random.default_rng(1))["w"]
    limit = 1.0 / math.sqrt(400)
    assert abs(w.mean()) < 0.05 * limit


def test_loss_at_zero_params_is_log_k():
    for spec in (LOGISTIC, MLP):
        params = init_params(spec, np.random.default_rng(0)).zeros_like()
        x = np.random.default_rng(1).standard_normal((5, spec.input_dim))
        y = np.array([0, 1, 2, 0, 1])
        loss, _ = loss_and_grad(spec, params, x, y)
        assert abs(loss - math.log(spec.num_classes)) < 1e-12


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(2)
    for spec in (LOGISTIC, MLP):
        params, x, _ = random_instance(spec, rng)
        p = predict_proba(spec, params, x)
        assert p.shape == (6, spec.num_classes)
        assert np.all(p > 0)
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-12


def test_predict_tie_goes_to_lowest_class():
    params = init_params(LOGISTIC, np.random.default_rng(0)).zeros_like()
    # zero params make every class equally likely
    out = predict(LOGISTIC, params, np.array([[1.0, -1.0]]))
    assert out[0] == 0


def test_batch_validation_errors():
    params = init_params(LOGISTIC, np.random.default_rng(0))
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, params, np.zeros((0, 2)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, params, np.zeros((2, 2)), np.array([0, 3]))
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, params, np.zeros((2, 2)), np.array([0, -1]))
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, params, np.zeros((2, 3)), np.array([0, 1]))
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, params, np.zeros((2, 2)), np.array([0.0, 1.0]))


def _flatten(params):
    return np.concatenate([v.ravel() for _, v in params.items()])


def _finite_difference_grad(spec, params, x, y, step=1e-5):
    """Central differences on the loss, one coordinate at a time."""
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        it = np.nditer(value, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            bumped = {k: v.copy() for k, v in params.items()}
            bumped[name][idx] += step
            up, _ = loss_and_grad(spec, ParamSet(bumped), x, y)
            bumped[name][idx] -= 2 * step
            down, _ = loss_and_grad(spec, ParamSet(bumped), x, y)
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return ParamSet(grads)


@pytest.mark.parametrize("spec", [LOGISTIC, MLP], ids=["logistic", "mlp"])
def test_gradient_matches_finite_differences(spec):
    rng = np.random.default_rng(42)
    instances = 100
    for _ in range(instances):
        params, x, y = random_instance(spec, rng, n=int(rng.integers(1, 8)))
        _, analytic = loss_and_grad(spec, params, x, y)
        numeric = _finite_difference_grad(spec, params, x, y)
        a, f = _flatten(analytic), _flatten(numeric)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        assert np.max(np.abs(a - f) / denom) <= 1e-4


def test_duplicating_samples_preserves_loss_and_grad():
    rng = np.random.default_rng(3)
    params, x, y = random_instance(MLP, rng)
    loss1, grad1 = loss_and_grad(MLP, params, x, y)
    loss2, grad2 = loss_and_grad(MLP, params, np.vstack([x, x]), np.concatenate([y, y]))
    assert abs(loss1 - loss2) < 1e-14
    for name in grad1.names:
        assert np.allclose(grad1[name], grad2[name], rtol=1e-13, atol=1e-16)


def test_l1_norm_examples():
    assert l1_norm(ParamSet({"a": np.array([3.0, -4.0]), "b": np.array([0.0])})) == 7.0
    assert l1_norm(ParamSet({"a": np.zeros(5)})) == 0.0


def test_clip_example_and_passthrough():
    g = ParamSet({"a": np.array([3.0, -3.0])})
    clipped = clip_gradient_l1(g, 3.0)
    assert np.array_equal(clipped["a"], [1.5, -1.5])
    small = ParamSet({"a": np.array([0.5, -0.5])})
    assert clip_gradient_l1(small, 3.0) is small
    with pytest.raises(ValueError):
        clip_gradient_l1(g, 0.0)
    with pytest.raises(ValueError):
        clip_gradient_l1(g, -1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 50.0))
def test_clip_bounds_norm_and_is_idempotent(seed, xi):
    rng = np.random.default_rng(seed)
    g = ParamSet({"w": rng.standard_normal((3, 2)) * 10, "b": rng.standard_normal(3)})
    once = clip_gradient_l1(g, xi)
    assert l1_norm(once) <= xi or l1_norm(g) <= xi
    twice = clip_gradient_l1(once, xi)
    for name in once.names:
        assert np.array_equal(once[name], twice[name])


def test_clipped_norm_never_exceeds_bound_bulk():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        g = ParamSet({"w": rng.standard_normal(8) * rng.uniform(0.1, 100)})
        xi = rng.uniform(0.01, 10)
        assert l1_norm(clip_gradient_l1(g, xi)) <= xi


def test_sgd_example_and_linearity():
    params = ParamSet({"w": np.zeros(1)})
    grad = ParamSet({"w": np.ones(1)})
    stepped = sgd_step(params, grad, 0.1)
    assert np.array_equal(stepped["w"], [-0.1])
    # two half-steps of a fixed gradient land where one full step does
    rng = np.random.default_rng(5)
    p = ParamSet({"w": rng.standard_normal(4)})
    g = ParamSet({"w": rng.standard_normal(4)})
    half = sgd_step(sgd_step(p, g, 0.05), g, 0.05)
    full = sgd_step(p, g, 0.1)
    assert np.allclose(half["w"], full["w"], rtol=1e-12, atol=1e-15)


def test_sgd_validation():
    p = ParamSet({"w": np.zeros(2)})
    g = ParamSet({"w": np.zeros(3)})
    with pytest.raises(ShapeMismatchError):
        sgd_step(p, g, 0.1)
    with pytest.raises(ValueError):
        sgd_step(p, ParamSet({"w": np.zeros(2)}), 0.0)
