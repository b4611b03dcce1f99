import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from bridgelab.coupling import make_coupling
from bridgelab.data import DatasetSpec, PriorSpec, ring_means
from bridgelab.metrics import (MetricError, coupling_corr, energy_distance, inversion_error,
                               mode_coverage, straightness, trajectory_variance)
from bridgelab.rng import RngStream
from bridgelab.schedule import ScheduleParams, beta, kappa_bar
from bridgelab.sde import Trajectory

P = ScheduleParams(4.0, 0.1)


def _line(T, n=3):
    times = np.linspace(0, 1, T + 1)
    end = np.arange(1, n + 1)[:, None] * np.array([1.0, -2.0])
    return Trajectory(times, times[:, None, None] * end[None])


def test_straight_line():
    np.testing.assert_allclose(straightness(_line(100)), 0.01, rtol=1e-12)
    np.testing.assert_allclose(straightness(_line(1)), 1.0, rtol=1e-12)


@given(arrays(float, (6, 2, 2), elements=st.floats(-10, 10)))
def test_straightness_lower_bound(states):
    d = states[-1] - states[0]
    if np.any(np.sum(d * d, axis=1) < 1e-6):
        return
    s = straightness(Trajectory(np.linspace(0, 1, 6), states))
    assert np.all(s >= 1 / 5 - 1e-12)


def test_straightness_errors():
    states = np.zeros((5, 2, 2))
    states[:, 1, 0] = np.linspace(0, 1, 5)
    with pytest.raises(MetricError):
        straightness(Trajectory(np.linspace(0, 1, 5), states))
    with pytest.raises(MetricError):
        straightness(Trajectory(np.zeros(1), np.zeros((1, 2, 2))))


def test_straightness_brownian_reference():
    rng = np.random.default_rng(0)
    steps = rng.normal(size=(100, 10_000, 2)) * 0.1
    states = np.concatenate([np.zeros((1, 10_000, 2)), np.cumsum(steps, axis=0)])
    ref = np.empty(10_000)
    for i in range(10_000):
        inc = np.diff(states[:, i], axis=0)
        net = states[-1, i] - states[0, i]
        ref[i] = np.sum(inc ** 2) / np.sum(net ** 2)
    s = straightness(Trajectory(np.linspace(0, 1, 101), states))
    np.testing.assert_allclose(s, ref, rtol=1e-12)
    assert s.mean() == pytest.approx(ref.mean(), rel=1e-12)


def test_trajectory_variance_deterministic_is_zero():
    x1 = RngStream(0).normal((50, 2))
    v = trajectory_variance(P, None, x1, 4, 20, RngStream(0, "tv"), noise=False)
    assert v == 0.0
    # one step with its noise dropped is also deterministic
    assert trajectory_variance(P, None, x1, 4, 1, RngStream(0, "tv"), denoise_final=True) == 0.0


def test_trajectory_variance_base_reverse_diffusion():
    # v = 0: linear recursion, so the per-dim spread is accumulated in closed form
    nfe, reps = 50, 10
    dt = 1.0 / nfe
    var = 0.0
    for k in range(nfe):
        b = beta(P, 1.0 - k * dt)
        var = (1 + 0.5 * b * dt) ** 2 * var + b * dt
    # Rayleigh mean of the distance to a sample centroid of ``reps`` points
    expected = math.sqrt(var * (reps - 1) / reps) * math.sqrt(math.pi / 2)
    x1 = RngStream(1).normal((2000, 2))
    got = trajectory_variance(P, None, x1, reps, nfe, RngStream(1, "tv"))
    assert got == pytest.approx(expected, rel=0.05)
    with pytest.raises(MetricError):
        trajectory_variance(P, None, x1, 1, nfe, RngStream(1))


def test_inversion_error_deterministic_linear():
    x0 = RngStream(2).normal((100, 2))
    err = inversion_error(P, None, None, x0, 2000, RngStream(2), noise=False)
    assert err < 5e-3
    assert inversion_error(P, None, None, x0, 20, RngStream(2)) > 0.5


def test_energy_distance_examples():
    a = RngStream(3).normal((500, 2))
    assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    x = RngStream(4, "a").normal(10_000)
    y = 3.0 + RngStream(4, "b").normal(10_000)
    assert energy_distance(x, y) > 1.0
    z = RngStream(4, "c").normal(10_000)
    assert energy_distance(x, z) < 0.02


@given(arrays(float, (6, 2), elements=st.floats(-5, 5)),
       arrays(float, (7, 2), elements=st.floats(-5, 5)))
def test_energy_distance_symmetric_nonnegative(a, b):
    d = energy_distance(a, b)
    assert d >= 0.0
    assert d == pytest.approx(energy_distance(b, a), abs=1e-9)


def test_energy_distance_errors():
    with pytest.raises(MetricError):
        energy_distance(np.zeros((1, 2)), np.zeros((5, 2)))
    with pytest.raises(MetricError):
        energy_distance(np.zeros((4, 2)), np.zeros((5, 3)))


def test_mode_coverage():
    m = ring_means()
    assert mode_coverage(np.repeat(m, 10, axis=0), m) == 8
    assert mode_coverage(np.repeat(m[:1], 50, axis=0), m) == 1
    assert mode_coverage(np.zeros((0, 2)), m) == 0
    assert mode_coverage(np.zeros((100, 2)), m) == 0


def test_coupling_correlations():
    ds, pr = DatasetSpec("isotropic-gaussian"), PriorSpec()
    ind = make_coupling("independent", P, ds, pr, 10_000, RngStream(5))
    assert np.all(np.abs(coupling_corr(ind)) < 0.05)
    base = make_coupling("base-joint", P, ds, pr, 10_000, RngStream(5))
    np.testing.assert_allclose(coupling_corr(base), kappa_bar(P, 1.0), atol=0.02)
    assert kappa_bar(P, 1.0) == pytest.approx(0.3588, abs=1e-4)
