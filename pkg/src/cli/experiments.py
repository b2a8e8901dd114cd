"""
Prethermal - Experiment Runners
One function per experiment kind. Each takes a validated ExperimentConfig and
returns its tables plus a summary dict for the manifest.
"""

from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

from src.cli.config import ExperimentConfig, parse_initial_states, parse_population
from src.dynamics.bloch import (
    CENTER_METHODS,
    ball_center,
    ball_radius,
    ball_snapshot,
    default_horizon,
    integrate_population,
    pretherm_condition,
)
from src.errors import ConfigError
from src.oracle.finite_bath import compare_with_quadrature, discretize, sum_rule, validate_wigner_weisskopf
from src.processing import heatflux
from src.processing.pretherm import SCAN_AXES, PrethermDetector, fit_scaling, scan_tpr
from src.rates.correlations import (
    approx_rate_function,
    approx_rate_trace,
    decay_rates_exact,
    decay_rates_resonant,
)

Tables = Dict[str, pd.DataFrame]
Outcome = Tuple[Tables, Dict[str, Any]]

RATE_METHODS = ('approx', 'resonant', 'exact')


def _horizon(cfg: ExperimentConfig) -> float:
    if cfg.simulation.t_max is not None:
        return cfg.simulation.t_max
    return default_horizon(cfg.single, cfg.system)


def _times(cfg: ExperimentConfig, key: str = 'times') -> np.ndarray:
    if key in cfg.options:
        times = cfg.options[key]
        if not isinstance(times, list) or not times:
            raise ConfigError("expected a non-empty list of times", f"options.{key}")
        return np.asarray(sorted(float(t) for t in times))
    return cfg.simulation.time_grid(_horizon(cfg))


def run_rates(cfg: ExperimentConfig, threads: int) -> Outcome:
    """Decay rates from the requested methods, side by side on one grid."""
    methods = cfg.options.get('methods', ['approx'])
    for method in methods:
        if method not in RATE_METHODS:
            raise ConfigError(f"unknown rate method {method!r}", 'options.methods')
    times = _times(cfg)
    spec, sys, quad = cfg.single, cfg.system, cfg.simulation.quad

    table = pd.DataFrame({'t': times})
    for method in methods:
        if method == 'approx':
            trace = approx_rate_trace(spec, sys, times)
        elif method == 'resonant':
            trace = decay_rates_resonant(spec, sys, times, quad, threads)
        else:
            trace = decay_rates_exact(spec, sys, times, quad, threads)
        frame = trace.to_frame().drop(columns='t')
        table = pd.concat([table, frame.add_suffix(f'_{method}')], axis=1)

    j1, j2, n1, n2 = spec.at(sys.omega0)
    summary = {
        'methods': methods,
        'gamma_plus_initial': j1 * n1,
        'gamma_plus_final': j1 * n2,
        'gamma_minus_initial': j1 * (n1 + 1.0),
        'gamma_minus_final': j1 * (n2 + 1.0),
    }
    return {cfg.name: table}, summary


def run_trajectory(cfg: ExperimentConfig, threads: int) -> Outcome:
    """Population and coherence trajectories for every initial state."""
    spec, sys = cfg.single, cfg.system
    states = parse_initial_states(cfg.options.get('initial_states', f"thermal({spec.r1.beta})"), sys.omega0)
    times = cfg.simulation.time_grid(_horizon(cfg))

    source = cfg.options.get('rate_source', 'approx')
    if source == 'approx':
        rates = approx_rate_function(spec, sys)
    elif source == 'resonant':
        samples = np.linspace(times[0], times[-1], min(times.size, 400))
        rates = decay_rates_resonant(spec, sys, samples, cfg.simulation.quad, threads).interpolant()
    else:
        raise ConfigError(f"rate_source must be approx or resonant, got {source!r}", 'options.rate_source')

    frames = []
    for label, state in states:
        trace = integrate_population(
            rates, state.rho_pp, times,
            rho_pm0=state.rho_pm,
            omega0=sys.omega0,
            lamb_shift=bool(cfg.options.get('lamb_shift', True)),
            integrator=cfg.simulation.integrator,
        )
        frame = trace.to_frame()
        frame.insert(0, 'state', label)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)

    condition = pretherm_condition(spec, sys)
    summary: Dict[str, Any] = {
        'states': [label for label, _ in states],
        'timescale_ratio': condition.ratio,
        'timescale_separated': condition.satisfied,
    }
    if cfg.options.get('detect', False):
        detector = PrethermDetector(sys, cfg.options.get('d_pr'), cfg.simulation.integrator)
        summary['pretherm'] = detector.detect(spec, t_max=cfg.simulation.t_max).to_dict()
    return {cfg.name: table}, summary


def run_ball(cfg: ExperimentConfig, threads: int) -> Outcome:
    """Radius, center and rotation of the accessible ball at selected times."""
    spec, sys = cfg.single, cfg.system
    methods = cfg.options.get('methods', ['incomplete_gamma'])
    for method in methods:
        if method not in CENTER_METHODS:
            raise ConfigError(f"unknown center method {method!r}", 'options.methods')
    times = _times(cfg)

    table = pd.DataFrame({
        't': times,
        'radius': ball_radius(spec, sys, times),
        'phase': sys.omega0 * times,
    })
    for method in methods:
        table[f'center_{method}'] = ball_center(spec, sys, times, method)

    tables = {cfg.name: table}
    if 'initial_states' in cfg.options:
        states = parse_initial_states(cfg.options['initial_states'], sys.omega0)
        rows = []
        for t in times:
            snapshot = ball_snapshot(spec, sys, t, methods[0])
            for label, state in states:
                px, py, pz = snapshot.apply(state.p)
                rows.append({'t': t, 'state': label, 'p_x': px, 'p_y': py, 'p_z': pz})
        tables[f'{cfg.name}.states'] = pd.DataFrame(rows)

    return tables, {'methods': methods, 'timescale_ratio': pretherm_condition(spec, sys).ratio}


def run_pretherm_scan(cfg: ExperimentConfig, threads: int) -> Outcome:
    """t_pr over one parameter axis."""
    axis = cfg.options.get('axis')
    if axis not in SCAN_AXES:
        raise ConfigError(f"axis must be one of {SCAN_AXES}", 'options.axis')
    values = cfg.options.get('values')
    if not isinstance(values, list) or not values:
        raise ConfigError("expected a non-empty list of values", 'options.values')

    table = scan_tpr(
        cfg.single, cfg.system, axis, [float(v) for v in values],
        d_pr=float(cfg.options.get('d_pr', 1e-2)),
        threads=threads,
        t_max=cfg.simulation.t_max,
        integrator=cfg.simulation.integrator,
        verbose=True,
    )
    summary: Dict[str, Any] = {
        'axis': axis,
        'reasons': table['reason'].value_counts().to_dict(),
    }
    if (table['reason'] == 'ok').sum() >= 2:
        summary['log_log_slope'] = fit_scaling(table).slope
    return {cfg.name: table}, summary


def run_heatflux(cfg: ExperimentConfig, threads: int) -> Outcome:
    """Two-environment heat currents and their sign reversals."""
    spec = heatflux.TwoEnvSpec(cfg.environments['left'], cfg.environments['right'], cfg.system)
    initial = parse_population(cfg.options.get('initial_state', 'qs(I,I)'), cfg.system.omega0)
    if isinstance(initial, tuple):
        initial = heatflux.quasi_stationary_population(spec, *initial)

    horizon = cfg.simulation.t_max or heatflux.default_horizon(spec)
    if cfg.simulation.grid == 'log':
        times = heatflux.log_time_grid(horizon, cfg.simulation.n_points)
    else:
        times = np.linspace(0.0, horizon, cfg.simulation.n_points)

    record = heatflux.integrate_two_env(spec, initial, times, cfg.simulation.integrator)
    table = record.to_frame()
    table['stage_left'] = [heatflux.epoch_stage(spec.left, t, cfg.system.omega0) for t in table['t']]
    table['stage_right'] = [heatflux.epoch_stage(spec.right, t, cfg.system.omega0) for t in table['t']]

    quantity = cfg.options.get('flip_quantity', 'plotted')
    if quantity not in heatflux.FLIP_QUANTITIES:
        raise ConfigError(f"flip_quantity must be one of {heatflux.FLIP_QUANTITIES}", 'options.flip_quantity')
    flips = heatflux.detect_sign_flips(record, quantity)

    summary = heatflux.flux_summary(spec, record)
    summary.update({'initial_population': initial, 'flip_quantity': quantity,
                    'sign_flips': flips['t_flip'].tolist()})
    return {cfg.name: table, f'{cfg.name}.flips': flips}, summary


def run_oracle_check(cfg: ExperimentConfig, threads: int) -> Outcome:
    """Finite-mode oracle against the quadrature correlations."""
    spec = cfg.single
    n_modes = int(cfg.options.get('N', 1000))
    m_modes = int(cfg.options.get('M', 50))
    omega_max = cfg.simulation.quad.omega_max(spec)
    bath = discretize(spec, n_modes, m_modes, omega_max)
    force = bool(cfg.options.get('force', False))

    pairs: List[Tuple[float, float]] = [tuple(map(float, p)) for p in cfg.options.get('pairs', [[1.0, 0.5]])]
    table, error = compare_with_quadrature(bath, pairs=pairs, quad_cfg=cfg.simulation.quad,
                                           threads=threads, force=force)

    ww_times = np.asarray(cfg.options.get('ww_times', np.linspace(0.0, 5.0, 11)), dtype=float)
    report = validate_wigner_weisskopf(bath, int(cfg.options.get('lambda_index', n_modes // 40)),
                                       ww_times, force)
    rule = sum_rule(bath)
    summary = {
        'N': n_modes,
        'M': m_modes,
        'omega_max': omega_max,
        'norm_relative_error': error,
        'wigner_weisskopf_max_deviation': report.max_deviation,
        'sum_rule_commutator': rule['commutator'],
        'sum_rule_coupling_weight': rule['coupling_weight'],
    }
    return {cfg.name: table}, summary


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig, int], Outcome]] = {
    'rates': run_rates,
    'trajectory': run_trajectory,
    'ball': run_ball,
    'pretherm_scan': run_pretherm_scan,
    'heatflux': run_heatflux,
    'oracle_check': run_oracle_check,
}
