import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from src.dynamics.bloch import IntegratorConfig
from src.environment.env_model import SystemSpec, composite_env
from src.errors import DomainError
from src.processing.heatflux import (
    TwoEnvSpec,
    default_horizon,
    detect_sign_flips,
    effective_temperature,
    epoch_stage,
    flux_summary,
    integrate_two_env,
    log_time_grid,
    quasi_stationary_population,
    steady_flux,
)

TIGHT = IntegratorConfig(rtol=1e-10, atol=1e-12)


def run(spec, rho_pp0=None, n_points=2000, integrator=TIGHT):
    rho_pp0 = quasi_stationary_population(spec, 'I', 'I') if rho_pp0 is None else rho_pp0
    return integrate_two_env(spec, rho_pp0, log_time_grid(default_horizon(spec), n_points), integrator)


def test_equilibrium_reference_values(equilibrium_flux):
    assert quasi_stationary_population(equilibrium_flux, 'I', 'I') == pytest.approx(0.454916, abs=1e-6)
    assert steady_flux(equilibrium_flux, 'right') == pytest.approx(3.642e-3, rel=1e-3)
    assert steady_flux(equilibrium_flux, 'left') == pytest.approx(-steady_flux(equilibrium_flux, 'right'), rel=1e-12)
    assert default_horizon(equilibrium_flux) == pytest.approx(249.1, rel=1e-3)


def test_effective_temperature(equilibrium_flux):
    beta, inverted = effective_temperature(quasi_stationary_population(equilibrium_flux, 'II', 'II'))
    # both sides at their RI temperature: rho_pp = S / (2 S + 2), S = n(1) + n(0.1)
    occupation = 1.0 / np.expm1(1.0) + 1.0 / np.expm1(0.1)
    assert beta == pytest.approx(np.log1p(2.0 / occupation), rel=1e-12)
    assert beta == pytest.approx(0.180829, abs=1e-6)
    assert not inverted
    assert effective_temperature(0.6)[1]
    for rho in (0.0, 1.0):
        with pytest.raises(DomainError):
            effective_temperature(rho)


def test_equilibrium_flux_is_constant(equilibrium_flux):
    record = run(equilibrium_flux, n_points=200)
    np.testing.assert_allclose(record.flux_right, steady_flux(equilibrium_flux, 'right'), rtol=1e-6)
    np.testing.assert_allclose(record.flux_left + record.flux_right, 0.0, atol=1e-10)
    assert detect_sign_flips(record).empty


def test_energy_balance(single_reversal):
    times = np.linspace(0.0, 300.0, 30001)
    record = integrate_two_env(single_reversal, 0.2, times, TIGHT)
    d_energy = np.gradient(record.energy, times)
    total = record.flux_left + record.flux_right
    np.testing.assert_allclose(d_energy[1:-1], total[1:-1], atol=1e-7)


@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(
    st.tuples(st.floats(min_value=0.0, max_value=1e-2), st.floats(min_value=0.0, max_value=1e-2)),
    st.tuples(*[st.floats(min_value=0.1, max_value=10.0)] * 4),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=1.0, max_value=200.0),
)
def test_energy_bookkeeping_on_random_setups(g_II, betas, rho_pp0, t_end):
    spec = TwoEnvSpec(
        left=composite_env(1e-2, g_II[0], betas[0], betas[1]),
        right=composite_env(1e-2, g_II[1], betas[2], betas[3]),
        sys=SystemSpec(),
    )
    record = integrate_two_env(spec, rho_pp0, np.linspace(0.0, t_end, 50), TIGHT)
    supplied, _ = quad(lambda s: sum(record.flux_at(s)), 0.0, t_end, epsabs=1e-12, epsrel=1e-10, limit=500)
    assert record.energy[-1] - record.energy[0] == pytest.approx(supplied, abs=1e-7)


def test_relaxes_to_steady_population(single_reversal):
    record = run(single_reversal)
    assert record.rho_pp[-1] == pytest.approx(quasi_stationary_population(single_reversal, 'II', 'II'), abs=1e-6)
    assert abs(record.flux_left[-1] + record.flux_right[-1]) < 1e-9


@pytest.mark.parametrize("stages", [('I', 'I'), ('II', 'II'), ('I', 'II')])
def test_steady_fluxes_balance(double_reversal, stages):
    total = steady_flux(double_reversal, 'left', stages) + steady_flux(double_reversal, 'right', stages)
    assert abs(total) < 1e-15


def test_single_reversal(single_reversal):
    record = run(single_reversal)
    flips = detect_sign_flips(record)
    assert len(flips) == 1
    j2 = single_reversal.left.at(1.0).j2
    assert flips.loc[0, 't_flip'] == pytest.approx(np.log(2.0) / j2, rel=1e-6)
    assert flips.loc[0, 'sign_before'] == 1
    assert flips.loc[0, 'sign_after'] == -1


def test_double_reversal(double_reversal):
    record = run(double_reversal)
    flips = detect_sign_flips(record)
    assert len(flips) == 2
    assert flips['t_flip'].iloc[0] == pytest.approx(246.0, rel=5e-2)
    assert flips['t_flip'].iloc[1] == pytest.approx(1.08e5, rel=5e-2)


def test_flip_quantities_share_zeros(single_reversal):
    record = run(single_reversal, n_points=500)
    plotted = detect_sign_flips(record, 'plotted')
    transport = detect_sign_flips(record, 'transport')
    np.testing.assert_allclose(plotted['t_flip'], transport['t_flip'], rtol=1e-9)
    with pytest.raises(DomainError):
        detect_sign_flips(record, 'heat')


def test_record_frame_and_summary(single_reversal):
    record = run(single_reversal, n_points=100)
    frame = record.to_frame()
    assert list(frame.columns) == ['t', 'rho_pp', 'energy', 'flux_left', 'flux_right',
                                   'flux_plotted', 'flux_transport']
    np.testing.assert_allclose(frame['flux_transport'], 0.5 * frame['flux_plotted'])
    summary = flux_summary(single_reversal, record)
    assert summary['rho_final'] == pytest.approx(summary['rho_steady'], abs=1e-6)
    assert summary['flux_right_final'] == pytest.approx(summary['flux_right_steady'], rel=1e-4)


def test_uncoupled_side_keeps_its_ri_occupation(system):
    spec = TwoEnvSpec(composite_env(1e-2, 0.0, 1.0, 0.1), composite_env(1e-2, 1e-3, 0.1, 1.0), system)
    assert quasi_stationary_population(spec, 'II', 'I') == pytest.approx(
        quasi_stationary_population(spec, 'I', 'I'), rel=1e-14)
    assert default_horizon(spec) == pytest.approx(30.0 / spec.right.at(1.0).j2)


def test_epoch_stage(plateau_env):
    j2 = plateau_env.at(1.0).j2
    assert epoch_stage(plateau_env, 0.05 / j2) == 'I'
    assert epoch_stage(plateau_env, 1.0 / j2) == 'crossover'
    assert epoch_stage(plateau_env, 20.0 / j2) == 'II'
    assert epoch_stage(composite_env(1e-2, 0.0, 1.0, 1.0), 1e9) == 'I'


def test_log_time_grid():
    grid = log_time_grid(100.0, 5)
    assert grid[0] == 0.0
    assert grid[1] == pytest.approx(1e-2)
    assert grid[-1] == pytest.approx(100.0)
    with pytest.raises(DomainError):
        log_time_grid(1e-3)


def test_unknown_side(equilibrium_flux):
    with pytest.raises(DomainError):
        equilibrium_flux.side('middle')
    with pytest.raises(DomainError):
        quasi_stationary_population(equilibrium_flux, 'III', 'I')
