import numpy as np
import pytest

from bridgelab import autodiff as ad
from bridgelab.oracles import finite_diff_grad

rng = np.random.default_rng(0)


def _check(build, *shapes):
    """Compare reverse-mode gradients of sum(build(*vars)) to central differences."""
    vals = [rng.normal(size=s) for s in shapes]
    vars_ = [ad.Var(v) for v in vals]
    out = ad.mean(build(*vars_))
    grads = ad.backward(out, vars_)
    for k, v in enumerate(vals):
        def f(x, k=k):
            args = [ad.Var(x if j == k else vals[j]) for j in range(len(vals))]
            return float(ad.mean(build(*args)).value)
        np.testing.assert_allclose(grads[k], finite_diff_grad(f, v, 1e-6), rtol=1e-6, atol=1e-9)


def test_add_mul_broadcast():
    _check(lambda a, b: a * b + b, (3, 2), (2,))


def test_sub_neg():
    _check(lambda a, b: a - b * 2.0 - (-a), (3, 2), (3, 2))


def test_matmul():
    _check(lambda a, b: a @ b, (4, 3), (3, 2))


def test_silu_square_sum():
    _check(lambda a: ad.sum_last(ad.square(ad.silu(a))), (5, 3))


def test_concat_take():
    _check(lambda a, b: ad.concat([a, ad.take(b, 2, 8, (3, 2))]), (3, 1), (10,))


def test_rsub_and_constants():
    _check(lambda a: 1.0 - a * np.array([1.0, 2.0]), (2, 2))


def test_stop_grad_blocks():
    a = ad.Var(np.array([1.0, 2.0]))
    out = ad.mean(ad.square(ad.stop_grad(a)) + a)
    (g,) = ad.backward(out, [a])
    np.testing.assert_allclose(g, [0.5, 0.5])


def test_reused_node_accumulates():
    a = ad.Var(np.array([3.0]))
    out = ad.mean(a * a + a)
    (g,) = ad.backward(out, [a])
    assert g[0] == pytest.approx(7.0)


def test_unused_var_gets_zero():
    a, b = ad.Var(np.ones(2)), ad.Var(np.ones(3))
    ga, gb = ad.backward(ad.mean(a), [a, b])
    np.testing.assert_array_equal(gb, 0.0)
