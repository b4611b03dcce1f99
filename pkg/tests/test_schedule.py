import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bridgelab.oracles import quadrature
from bridgelab.schedule import (ScheduleError, ScheduleParams, accumulated_rate, beta, drift,
                                kappa, kappa_bar, sigma, transition_moments)

P = ScheduleParams(4.0, 0.1)
P20 = ScheduleParams(20.0, 0.1)

unit = st.floats(0.0, 1.0, allow_nan=False)
schedules = st.builds(lambda lo, span: ScheduleParams(lo + span, lo),
                      st.floats(0.01, 2.0), st.floats(0.0, 25.0))


def test_beta_values():
    assert beta(P, 0.0) == 4.0
    assert beta(P, 1.0) == 0.1
    assert beta(P20, 0.5) == pytest.approx(10.05, abs=1e-14)


def test_drift_values():
    np.testing.assert_allclose(drift(P, 0.0, np.array([2.0, 0.0])), [-4.0, 0.0])
    np.testing.assert_array_equal(drift(P, 0.3, np.zeros(2)), 0.0)
    np.testing.assert_allclose(drift(P, 1.0, np.array([1.0])), [-0.05])


def test_drift_per_row_times():
    x = np.ones((3, 2))
    out = drift(P, np.array([0.0, 0.5, 1.0]), x)
    np.testing.assert_allclose(out[:, 0], [-2.0, -1.025, -0.05])


def test_sigma_values():
    assert sigma(P, 0.0) == 2.0
    assert sigma(P, 1.0) == pytest.approx(0.316228, abs=1e-6)
    assert sigma(P, 0.5) == pytest.approx(1.431782, abs=1e-6)


def test_accumulated_rate_values():
    assert accumulated_rate(P, 0.0, 1.0) == pytest.approx(2.05, abs=1e-14)
    assert accumulated_rate(P, 0.4, 0.4) == 0.0
    assert accumulated_rate(P, 0.0, 0.5) == pytest.approx(1.5125, abs=1e-14)
    q = quadrature(lambda t: beta(P, t), 0.0, 0.5, 100_000)
    assert q == pytest.approx(1.5125, rel=1e-8)


def test_kappa_values():
    assert kappa(P, 1.0) == 1.0
    assert kappa_bar(P, 0.0) == 1.0
    assert kappa_bar(P, 1.0) == pytest.approx(0.358796, abs=1e-6)
    assert kappa_bar(P, 1.0) == pytest.approx(math.exp(-1.025), rel=1e-14)
    assert kappa(P, 0.5) * kappa_bar(P, 0.5) == pytest.approx(0.358796, abs=1e-6)


def test_transition_moments_values():
    mean, var = transition_moments(P, 0.3, 0.3, np.array([1.0, -2.0]))
    np.testing.assert_array_equal(mean, [1.0, -2.0])
    assert var == 0.0
    mean, var = transition_moments(P, 0.0, 1.0, np.array([1.0, 1.0]))
    np.testing.assert_allclose(mean, 0.358796, atol=1e-6)
    assert var == pytest.approx(0.871265, abs=1e-6)


def test_transition_moments_beta20():
    # exp(-5.025) = 0.0065716; frozen at the computed value
    mean, var = transition_moments(P20, 0.0, 1.0, np.array([1.0]))
    assert mean[0] == pytest.approx(0.0065716, abs=1e-7)
    assert var == pytest.approx(0.999957, abs=1e-6)


def test_schedule_identities_grid():
    t = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(kappa(P, t) * kappa_bar(P, t), kappa_bar(P, 1.0), rtol=0, atol=1e-12)


def test_closed_form_vs_quadrature():
    for s, t in [(0.0, 1.0), (0.1, 0.7), (0.5, 0.55)]:
        q = quadrature(lambda x: beta(P, x), s, t, 1000)
        assert accumulated_rate(P, s, t) == pytest.approx(q, rel=1e-8)


def test_gaussian_data_stays_gaussian():
    kb1 = kappa_bar(P, 1.0)
    _, var = transition_moments(P, 0.0, 1.0, 0.0)
    assert kb1 ** 2 + var == pytest.approx(1.0, abs=1e-15)


@given(schedules, unit, unit, unit)
def test_semigroup(p, a, b, c):
    s, r, t = sorted([a, b, c])
    m_sr, v_sr = transition_moments(p, s, r, 1.0)
    m_rt, v_rt = transition_moments(p, r, t, 1.0)
    m_st, v_st = transition_moments(p, s, t, 1.0)
    assert m_sr * m_rt == pytest.approx(m_st, rel=1e-12, abs=1e-300)
    assert v_rt + m_rt ** 2 * v_sr == pytest.approx(v_st, abs=1e-12)


@given(schedules, unit)
def test_kappa_product_property(p, t):
    assert kappa(p, t) * kappa_bar(p, t) == pytest.approx(kappa_bar(p, 1.0), rel=1e-12)


@given(schedules, unit)
def test_sigma_squared_is_beta(p, t):
    assert sigma(p, t) ** 2 == pytest.approx(beta(p, t), rel=1e-14)


def test_errors():
    with pytest.raises(ScheduleError):
        ScheduleParams(0.1, 4.0)
    with pytest.raises(ScheduleError):
        ScheduleParams(4.0, 0.0)
    with pytest.raises(ScheduleError):
        ScheduleParams(4.0, 0.1, dim=0)
    with pytest.raises(ScheduleError):
        beta(P, 1.5)
    with pytest.raises(ScheduleError):
        beta(P, float("nan"))
    with pytest.raises(ScheduleError):
        accumulated_rate(P, 0.6, 0.5)
