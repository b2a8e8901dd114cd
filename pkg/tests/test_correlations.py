import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.environment.env_model import SystemSpec, composite_env
from src.errors import DomainError
from src.rates.correlations import (
    RateTrace,
    alpha_minus,
    alpha_plus,
    approx_rate_components,
    approx_rate_function,
    approx_rate_trace,
    correlation_pair,
    decay_rates_approx,
    decay_rates_exact,
    decay_rates_resonant,
    kernel_point,
    lamb_shift,
    lorentzian_kernel,
)
from src.rates.quadrature import QuadConfig

SHORT_WINDOW = QuadConfig(omega_max_factor=4.0)


def test_kernel_peak_value(plateau_env):
    assert lorentzian_kernel(plateau_env, 1.0, 1.0) == pytest.approx(4.0 / 9.048374e-6, rel=1e-6)


def test_kernel_zero_over_zero_is_zero():
    env = composite_env(1e-2, 0.0, 1.0, 1.0)
    assert lorentzian_kernel(env, 1.0, 1.0) == 0.0
    assert lorentzian_kernel(env, 2.0, np.array([0.5, 1.0])).tolist() == [0.0, 0.0]


@given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=0.0, max_value=50.0))
def test_kernel_is_nonnegative(omega, omega_prime):
    env = composite_env(1e-2, 1e-3, 1.0, 0.5)
    assert kernel_point(env, omega, omega_prime).value >= 0.0


def test_kernel_rejects_negative_frequency(plateau_env):
    with pytest.raises(DomainError):
        lorentzian_kernel(plateau_env, -1.0, 1.0)


def test_uncoupled_rii_gives_stationary_correlation():
    env = composite_env(1e-2, 0.0, 1.0, 1.0)
    early = alpha_plus(env, 5.0, 1.0, SHORT_WINDOW)
    late = alpha_plus(env, 12.0, 1.0, SHORT_WINDOW)
    assert late == pytest.approx(early, rel=1e-10)


def test_commutator_at_equal_times():
    env = composite_env(1e-2, 0.0, 1.0, 1.0)
    plus, minus = correlation_pair(env, 3.0, 0.0)
    # (1 / 2 pi) int_0^400 g w exp(-w / 10) dw with g = 1e-2
    assert (minus - plus).real == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-6)
    assert abs(plus.imag) < 1e-10
    assert plus.real > 0


def test_correlation_lag_must_lie_in_window(plateau_env):
    with pytest.raises(DomainError):
        alpha_minus(plateau_env, 1.0, 2.0)


def test_approx_rates_initial_value(plateau_env, system):
    gamma_plus, gamma_minus = decay_rates_approx(plateau_env, system, 0.0)
    assert gamma_plus == pytest.approx(5.2659e-3, rel=1e-4)
    assert gamma_minus / gamma_plus == pytest.approx(np.e, rel=1e-10)


def test_detailed_balance_crossover(plateau_env, system):
    j2 = plateau_env.at(1.0).j2
    gamma_plus, gamma_minus = decay_rates_approx(plateau_env, system, 1e3 / j2)
    assert gamma_minus / gamma_plus == pytest.approx(np.exp(0.1), rel=1e-10)


@settings(max_examples=1000, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=1e-5, max_value=1e-1),
)
def test_approx_rates_positive_and_monotone(beta_I, beta_II, g_II):
    env = composite_env(1e-2, g_II, beta_I, beta_II)
    sys_ = SystemSpec()
    times = np.linspace(0.0, 50.0 / env.at(1.0).j2, 200)
    gamma_plus, gamma_minus = decay_rates_approx(env, sys_, times)
    assert np.all(gamma_plus >= 0) and np.all(gamma_minus >= 0)
    # detailed balance at RI before and RII after the crossover
    assert gamma_minus[0] / gamma_plus[0] == pytest.approx(np.exp(beta_I), rel=1e-9)
    assert gamma_minus[-1] / gamma_plus[-1] == pytest.approx(np.exp(beta_II), rel=1e-9)
    steps = np.diff(gamma_plus)
    if beta_I < beta_II:
        assert np.all(steps <= 1e-15)
    elif beta_I > beta_II:
        assert np.all(steps >= -1e-15)


def test_components_add_up(plateau_env, system):
    times = np.array([0.0, 10.0, 1e5])
    parts = approx_rate_components(plateau_env, system, times)
    gamma_plus, gamma_minus = decay_rates_approx(plateau_env, system, times)
    np.testing.assert_allclose(parts['plus_st'] + parts['plus_lt'], gamma_plus, rtol=1e-14)
    np.testing.assert_allclose(parts['minus_st'] + parts['minus_lt'], gamma_minus, rtol=1e-14)
    assert parts['plus_lt'][0] == 0.0


def test_rate_function_matches_vectorised_rates(plateau_env, system):
    rates = approx_rate_function(plateau_env, system)
    for t in (0.0, 3.0, 4e4):
        gamma_plus, gamma_minus, shift = rates(t)
        assert (gamma_plus, gamma_minus) == pytest.approx(decay_rates_approx(plateau_env, system, t), rel=1e-13)
        assert shift == 0.0


def test_rate_trace_frame_and_interpolant(plateau_env, system):
    times = np.linspace(0.0, 2e5, 41)
    trace = approx_rate_trace(plateau_env, system, times)
    frame = trace.to_frame()
    assert list(frame.columns) == ['t', 'gamma_plus', 'gamma_minus', 'delta_omega',
                                   'gamma_plus_st', 'gamma_plus_lt', 'gamma_minus_st', 'gamma_minus_lt']
    rates = trace.interpolant()
    assert rates(times[7])[0] == pytest.approx(trace.gamma_plus[7], rel=1e-12)
    assert rates(-1.0)[0] == pytest.approx(trace.gamma_plus[0], rel=1e-12)


def test_rate_trace_rejects_unsorted_times():
    with pytest.raises(DomainError):
        RateTrace(np.array([0.0, 2.0, 1.0]), np.zeros(3), np.zeros(3), np.zeros(3))


def test_exact_rates_vanish_at_origin(plateau_env, system):
    trace = decay_rates_exact(plateau_env, system, [0.0], SHORT_WINDOW)
    assert trace.gamma_plus[0] == 0.0
    assert trace.gamma_minus[0] == 0.0
    assert trace.delta_omega[0] == 0.0


def test_single_bath_rate_reaches_markov_value(system):
    env = composite_env(1e-2, 0.0, 1.0, 1.0)
    j1, _, n1, _ = env.at(1.0)
    trace = decay_rates_exact(env, system, [100.0], threads=1)
    assert trace.gamma_plus[0] == pytest.approx(j1 * n1, rel=2e-2)
    assert trace.gamma_minus[0] == pytest.approx(j1 * (n1 + 1.0), rel=2e-2)
    assert trace.gamma_plus_lt[0] == 0.0


def test_lamb_shift_matches_trace(system):
    env = composite_env(1e-2, 0.0, 1.0, 1.0)
    shift = lamb_shift(env, system, [5.0, 10.0], SHORT_WINDOW)
    trace = decay_rates_exact(env, system, [5.0, 10.0], SHORT_WINDOW)
    np.testing.assert_allclose(shift, trace.delta_omega, rtol=1e-14)
    assert np.all(np.isfinite(shift))


@pytest.mark.parametrize("t", [20.0, 50.0, 200.0, 1000.0])
def test_resonant_long_time_part_matches_closed_form(plateau_env, system, t):
    trace = decay_rates_resonant(plateau_env, system, [t], SHORT_WINDOW)
    parts = approx_rate_components(plateau_env, system, t)
    assert trace.gamma_plus_lt[0] == pytest.approx(parts['plus_lt'], rel=5e-2)
    assert trace.gamma_minus_lt[0] == pytest.approx(parts['minus_lt'], rel=5e-2)


def test_resonant_rates_keep_input_order_with_threads(plateau_env, system):
    times = [20.0, 40.0, 60.0, 80.0]
    serial = decay_rates_resonant(plateau_env, system, times, SHORT_WINDOW, threads=1)
    pooled = decay_rates_resonant(plateau_env, system, times, SHORT_WINDOW, threads=4)
    np.testing.assert_array_equal(serial.gamma_plus, pooled.gamma_plus)


@pytest.mark.slow
@pytest.mark.parametrize("t", [20.0, 40.0])
def test_exact_long_time_part(components_env, system, t):
    cfg = QuadConfig(omega_max_factor=1.0, rel_tol=1e-4)
    exact = decay_rates_exact(components_env, system, [t], cfg)
    resonant = decay_rates_resonant(components_env, system, [t], cfg)
    closed = approx_rate_components(components_env, system, t)
    assert exact.gamma_plus_lt[0] == pytest.approx(closed['plus_lt'], rel=5e-2)
    assert exact.gamma_plus_lt[0] == pytest.approx(resonant.gamma_plus_lt[0], rel=2.5e-2)
