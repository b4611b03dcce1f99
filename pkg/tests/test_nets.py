import json

import numpy as np
import pytest

from bridgelab import autodiff as ad
from bridgelab.nets import (Arch, ControlField, NonFiniteLoss, OptimizerState, evaluate,
                            from_json, init_field, load_field, loss_grad, param_count,
                            save_field, sq_norm_rows, step, to_json)
from bridgelab.oracles import finite_diff_grad

A = Arch(2, (8, 8), 2)


def _random_field(seed=0, arch=A, te=2):
    f = init_field(seed, arch, te)
    return f.with_params(np.random.default_rng(seed).normal(size=f.params.size) * 0.5)


def test_zero_init_output():
    f = init_field(0, A)
    x = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(evaluate(f, 0.3, x), 0.0)
    np.testing.assert_array_equal(f(np.linspace(0, 1, 5), x), 0.0)


def test_init_determinism():
    np.testing.assert_array_equal(init_field(3, A).params, init_field(3, A).params)
    assert not np.array_equal(init_field(3, A).params, init_field(4, A).params)


def test_identity_layer():
    arch = Arch(2, (), 2)
    f = init_field(0, arch, 8)
    p = np.zeros(param_count(arch, 8))
    w = np.zeros((2 + 17, 2))
    w[:2, :2] = np.eye(2)
    p[:w.size] = w.ravel()
    f = f.with_params(p)
    x = np.array([[1.0, -2.0], [0.5, 3.0]])
    np.testing.assert_allclose(evaluate(f, 0.7, x), x)


def test_golden_value():
    f = init_field(7, A, 2)
    f = f.with_params(np.sin(np.arange(f.params.size) * 0.37) * 0.5)
    out = evaluate(f, 0.3, np.array([[0.5, -1.0]]))
    np.testing.assert_allclose(out, [[-0.3272754634565031, -0.09371362821024043]], rtol=1e-13)


def test_single_row_input():
    f = _random_field()
    x = np.array([0.3, 0.1])
    np.testing.assert_allclose(evaluate(f, 0.2, x), evaluate(f, 0.2, x[None])[0])


def test_no_time_embedding():
    f = _random_field(te=None)
    assert param_count(A, None) == f.params.size
    np.testing.assert_array_equal(evaluate(f, 0.1, np.ones((2, 2))),
                                  evaluate(f, 0.9, np.ones((2, 2))))


def test_bad_inputs():
    f = init_field(0, A)
    with pytest.raises(ValueError):
        evaluate(f, 0.0, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ControlField(A, 8, np.zeros(3))
    with pytest.raises(ValueError):
        Arch(0, (4,), 2)
    with pytest.raises(ValueError):
        Arch(2, (4,), 2, activation="relu")


def test_zero_init_gradient_of_half_norm():
    f = init_field(0, A)
    x = np.random.default_rng(1).normal(size=(4, 2))
    loss, g = loss_grad(f, lambda fn: ad.mul(sq_norm_rows(fn(0.5, x)), 0.5))
    assert loss == 0.0
    np.testing.assert_array_equal(g, 0.0)


def test_gradient_matches_finite_differences():
    f = _random_field(3)
    rng = np.random.default_rng(3)
    x, y, t = rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), rng.uniform(size=6)
    _, g = loss_grad(f, lambda fn: sq_norm_rows(fn(t, x) - y))

    def loss(p):
        r = evaluate(f.with_params(p), t, x) - y
        return float(np.mean(np.sum(r * r, axis=1)))

    fd = finite_diff_grad(loss, f.params, 1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)


def test_input_gradient_through_var():
    f = _random_field(5)
    x0 = np.random.default_rng(5).normal(size=(3, 2))
    xv = ad.Var(x0)
    pv = ad.Var(f.params)
    from bridgelab.nets import apply
    out = ad.mean(sq_norm_rows(apply(f, pv, 0.4, xv)))
    gx, gp = ad.backward(out, [xv, pv])

    def fx(x):
        r = evaluate(f, 0.4, x)
        return float(np.mean(np.sum(r * r, axis=1)))

    np.testing.assert_allclose(gx, finite_diff_grad(fx, x0, 1e-6), rtol=1e-5, atol=1e-9)


def test_linear_regression_gradient():
    arch = Arch(2, (), 2)
    rng = np.random.default_rng(2)
    W = rng.normal(size=(2, 2))
    f = init_field(0, arch, None).with_params(np.concatenate([W.ravel(), np.zeros(2)]))
    x, y = rng.normal(size=(1, 2)), rng.normal(size=(1, 2))
    _, g = loss_grad(f, lambda fn: ad.mul(sq_norm_rows(fn(0.0, x) - y), 0.5))
    r = x @ W - y
    np.testing.assert_allclose(g[:4].reshape(2, 2), x.T @ r, rtol=1e-12)
    np.testing.assert_allclose(g[4:], r[0], rtol=1e-12)


def test_stop_flag_zeroes_gradient():
    f = _random_field(4)
    x = np.ones((2, 2))
    _, g = loss_grad(f, lambda fn: sq_norm_rows(fn(0.1, x, stop=True)))
    np.testing.assert_array_equal(g, 0.0)


def test_nonfinite_loss_raises():
    f = _random_field(4)
    x = np.ones((3, 2))
    x[1, 0] = np.nan
    with pytest.raises(NonFiniteLoss) as e:
        loss_grad(f, lambda fn: sq_norm_rows(fn(0.1, x)))
    assert e.value.index == 1


def test_sgd_step():
    arch = Arch(1, (), 1)
    f = ControlField(arch, None, np.array([1.0, 0.0]))
    new, opt = step(OptimizerState("sgd", 0.1), f, np.array([1.0, 0.0]))
    np.testing.assert_allclose(new.params, [0.9, 0.0])
    assert opt.step_count == 1


def test_adam_first_step_magnitude():
    f = _random_field(0)
    g = np.random.default_rng(0).normal(size=f.params.size)
    new, _ = step(OptimizerState("adam", 1e-3), f, g)
    np.testing.assert_allclose(np.abs(new.params - f.params), 1e-3, rtol=1e-4)
    np.testing.assert_array_equal(np.sign(f.params - new.params), np.sign(g))


def test_zero_grad_leaves_params():
    f = _random_field(0)
    for method in ("sgd", "adam"):
        new, _ = step(OptimizerState(method), f, np.zeros_like(f.params))
        np.testing.assert_array_equal(new.params, f.params)


def test_step_shape_and_method_checks():
    f = _random_field(0)
    with pytest.raises(ValueError):
        step(OptimizerState(), f, np.zeros(3))
    with pytest.raises(ValueError):
        OptimizerState("rmsprop")


def test_json_round_trip_and_prev_rotation(tmp_path):
    f = _random_field(9)
    g = from_json(json.loads(json.dumps(to_json(f))))
    np.testing.assert_array_equal(f.params, g.params)
    assert g.arch == f.arch and g.time_embed == f.time_embed
    path = tmp_path / "v.ckpt.json"
    save_field(f, path)
    f2 = f.with_params(f.params + 1.0)
    save_field(f2, path)
    np.testing.assert_array_equal(load_field(path).params, f2.params)
    np.testing.assert_array_equal(load_field(tmp_path / "v.ckpt.json.prev").params, f.params)
