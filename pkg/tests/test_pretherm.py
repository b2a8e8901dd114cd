import numpy as np
import pandas as pd
import pytest
from scipy.optimize import brentq

from src.dynamics.bloch import BlochState
from src.environment.env_model import composite_env
from src.errors import DomainError
from src.processing.pretherm import (
    PrethermDetector,
    PrethermResult,
    detect_pretherm,
    fit_scaling,
    run_scan,
    scan_tpr,
    trace_distance,
    with_axis_value,
)
from src.rates.correlations import approx_rate_function


def test_trace_distance_forms_agree():
    a = BlochState((0.3, -0.2, 0.5))
    b = BlochState((0.0, 0.1, -0.4))
    from_vectors = trace_distance(a, b)
    assert from_vectors == pytest.approx(0.5 * np.linalg.norm([0.3, -0.3, 0.9]))
    assert trace_distance(a.density_matrix(), b.density_matrix()) == pytest.approx(from_vectors, rel=1e-12)
    assert trace_distance(a, b.density_matrix()) == pytest.approx(from_vectors, rel=1e-12)
    with pytest.raises(DomainError):
        trace_distance(np.eye(3), np.eye(3))


def test_with_axis_value(plateau_env):
    assert with_axis_value(plateau_env, 'beta_II', 0.3).r2.beta == 0.3
    assert with_axis_value(plateau_env, 'beta_I', 2.0).r1.beta == 2.0
    assert with_axis_value(plateau_env, 'g_II', 1e-4).r2.spectral.g == 1e-4
    assert plateau_env.r2.beta == 0.1
    with pytest.raises(DomainError):
        with_axis_value(plateau_env, 'omega_c', 1.0)


def test_result_validation():
    with pytest.raises(DomainError):
        PrethermResult(1.0, 2.0, None, 3.0, 'ok', 0.2)
    with pytest.raises(DomainError):
        PrethermResult(None, None, None, None, 'late', 0.2)
    assert PrethermResult(1.0, 3.0, 2.0, 5.0, 'ok', 0.2).to_dict()['t_pr'] == 2.0


def test_detector_rejects_bad_threshold():
    with pytest.raises(DomainError):
        PrethermDetector(d_pr=0.0)
    with pytest.raises(DomainError):
        PrethermDetector(d_pr=1.5)


def contraction_reference(g_I, g_II, beta_I, beta_II, omega_c=10.0):
    """Root of J_I [(2 n_II + 1) t + 2 (n_I - n_II) (1 - exp(-J_II t)) / J_II] = ln 10 at omega0 = 1."""
    j1, j2 = g_I * np.exp(-1.0 / omega_c), g_II * np.exp(-1.0 / omega_c)
    n1, n2 = 1.0 / np.expm1(beta_I), 1.0 / np.expm1(beta_II)

    def decay(t):
        return j1 * ((2.0 * n2 + 1.0) * t + 2.0 * (n1 - n2) * -np.expm1(-j2 * t) / j2) - np.log(10.0)

    return brentq(decay, 1.0, 1e4, xtol=1e-12)


def test_prethermal_plateau(plateau_env, system):
    result = detect_pretherm(plateau_env, system)
    assert result.reason == 'ok'
    assert result.t_contract == pytest.approx(contraction_reference(1e-2, 1e-5, 1.0, 0.1), rel=1e-9)
    assert result.t_contract == pytest.approx(117.086, abs=1e-3)
    assert result.t_depart > result.t_contract
    assert result.t_pr == pytest.approx(result.t_depart - result.t_contract)
    assert 100.0 < result.t_pr < 5e3
    assert result.t_thermalize > result.t_depart
    assert result.thermal_distance == pytest.approx(0.5 * (np.tanh(0.5) - np.tanh(0.05)), rel=1e-12)


def test_control_has_no_plateau(control_env, system):
    result = detect_pretherm(control_env, system)
    assert result.reason == 'no_pretherm'
    assert result.t_depart < 10.0
    assert result.t_pr is None


def test_departure_is_grid_independent(plateau_env, system):
    class CoarseDetector(PrethermDetector):
        THRESHOLDS = {**PrethermDetector.THRESHOLDS, 'n_points': 50}

    fine = PrethermDetector(system).detect(plateau_env)
    coarse = CoarseDetector(system).detect(plateau_env)
    assert coarse.t_depart == pytest.approx(fine.t_depart, rel=1e-4)
    assert coarse.t_thermalize == pytest.approx(fine.t_thermalize, rel=1e-4)


def test_custom_rates_reproduce_closed_form_contraction(plateau_env, system):
    detector = PrethermDetector(system)
    horizon = 1e4
    closed = detector.contraction_time(plateau_env, horizon)
    from_ode = detector.contraction_time(plateau_env, horizon, approx_rate_function(plateau_env, system))
    assert from_ode == pytest.approx(closed, rel=1e-5)
    assert detector.contraction_time(plateau_env, 50.0) is None


def test_equal_temperatures_are_indistinguishable(system):
    result = detect_pretherm(composite_env(1e-2, 1e-5, 1.0, 1.0), system)
    assert result.reason == 'indistinguishable'
    assert result.thermal_distance == 0.0


def test_short_horizon_is_undefined(plateau_env, system):
    result = detect_pretherm(plateau_env, system, t_max=50.0)
    assert result.reason == 'undefined'
    assert 'contraction' in result.diagnostic


def test_tpr_does_not_wait_for_thermalization(plateau_env, system):
    full = detect_pretherm(plateau_env, system)
    short = detect_pretherm(plateau_env, system, t_max=5000.0)
    assert full.t_depart < 5000.0 < full.t_thermalize
    assert short.reason == 'ok'
    assert short.t_thermalize is None
    assert 'thermalization' in short.diagnostic
    assert short.t_pr == pytest.approx(full.t_pr, rel=1e-4)


def test_departure_without_contraction_is_no_plateau(control_env, system):
    result = detect_pretherm(control_env, system, t_max=10.0)
    assert result.reason == 'no_pretherm'
    assert result.t_contract is None
    assert 'any contraction' in result.diagnostic


def test_uncoupled_rii_needs_horizon(system):
    with pytest.raises(DomainError):
        detect_pretherm(composite_env(1e-2, 0.0, 1.0, 0.1), system)


def test_scan_keeps_order_and_reports_failures(plateau_env, system):
    values = [0.5, 1.0, -1.0, 0.1]
    table = scan_tpr(plateau_env, system, 'beta_II', values, threads=3)
    assert table['axis_value'].tolist() == values
    assert table['reason'].tolist() == ['ok', 'indistinguishable', 'undefined', 'ok']
    assert 'beta' in table.loc[2, 'diagnostic']
    assert np.isnan(table.loc[1, 't_pr'])


def test_threaded_scan_matches_serial_scan(plateau_env, system):
    values = [0.1, 0.3]
    serial = scan_tpr(plateau_env, system, 'beta_II', values, threads=1)
    threaded = scan_tpr(plateau_env, system, 'beta_II', values, threads=2)
    assert threaded['reason'].tolist() == ['ok', 'ok']
    np.testing.assert_allclose(threaded['t_pr'], serial['t_pr'], rtol=1e-5)


def test_scan_reports_unexpected_errors(plateau_env, system):
    class FlakyDetector(PrethermDetector):
        def detect(self, spec, t_max=None, rates=None):
            if spec.r2.beta == 0.3:
                raise RuntimeError("solver state busy")
            return super().detect(spec, t_max=t_max, rates=rates)

    table = FlakyDetector(system).scan(plateau_env, 'beta_II', [0.1, 0.3], threads=2, verbose=False)
    assert table['reason'].tolist() == ['ok', 'undefined']
    assert 'RuntimeError' in table.loc[1, 'diagnostic']
    assert table.loc[1, 'thermal_trace_distance'] == pytest.approx(0.5 * (np.tanh(0.5) - np.tanh(0.15)))


def test_tpr_grows_as_rii_temperature_approaches_ri(plateau_env, system):
    table = scan_tpr(plateau_env, system, 'beta_II', [0.1, 0.3, 0.6], threads=3)
    assert (table['reason'] == 'ok').all()
    assert table['t_pr'].is_monotonic_increasing


def test_tpr_scales_inversely_with_rii_coupling(plateau_env, system):
    table = scan_tpr(plateau_env, system, 'g_II', [1e-6, 3e-6, 1e-5, 3e-5], threads=4)
    fit = fit_scaling(table)
    assert fit.n_points == 4
    assert fit.slope == pytest.approx(-1.0, abs=0.1)


def test_fit_needs_two_points():
    table = pd.DataFrame({'axis_value': [1e-5], 't_pr': [100.0], 'reason': ['ok']})
    with pytest.raises(DomainError):
        fit_scaling(table)


def test_run_scan_writes_csv(plateau_env, system, tmp_path):
    table = run_scan(plateau_env, 'beta_II', [0.1, 1.0], system, threads=2,
                     out_dir=tmp_path, name='scan', verbose=False)
    saved = pd.read_csv(tmp_path / 'scan.csv')
    assert list(saved.columns) == list(table.columns)
    assert saved['reason'].tolist() == ['ok', 'indistinguishable']
