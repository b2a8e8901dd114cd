"""
Prethermal - Validation Checks
Fast acceptance subset run by `run.py validate`, one pass/fail line per check.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.dynamics.bloch import ball_center, ball_radius
from src.environment.env_model import SystemSpec, composite_env
from src.oracle.finite_bath import compare_with_quadrature, discretize
from src.processing.heatflux import TwoEnvSpec, steady_flux
from src.processing.pretherm import detect_pretherm
from src.rates.correlations import RateFunction, approx_rate_function
from src.rates.quadrature import QuadConfig

SYSTEM = SystemSpec(omega0=1.0)
PLATEAU = composite_env(g_I=1e-2, g_II=1e-5, beta_I=1.0, beta_II=0.1)
CONTROL = composite_env(g_I=1e-2, g_II=1e-2, beta_I=1.0, beta_II=0.1)
EQUILIBRIUM_FLUX = TwoEnvSpec(
    left=composite_env(g_I=1e-2, g_II=0.0, beta_I=1.0, beta_II=1.0),
    right=composite_env(g_I=1e-2, g_II=0.0, beta_I=0.1, beta_II=0.1),
    sys=SYSTEM,
)

ORACLE_PAIRS = [(1.0, 0.5), (3.0, 1.0), (5.0, 2.0), (2.0, 5.0)]


def _check(name: str, value: float, target: str, passed: bool) -> Dict:
    return {'check': name, 'value': float(value), 'target': target, 'passed': bool(passed)}


def _rate_checks(rate_fn: RateFunction) -> List[Dict]:
    j1, j2, n1, n2 = PLATEAU.at(SYSTEM.omega0)
    times = np.linspace(0.0, 30.0 / j2, 301)
    samples = np.array([rate_fn(t)[:2] for t in times])
    lowest = float(samples.min())

    reference = approx_rate_function(PLATEAU, SYSTEM)
    start_plus, start_minus, _ = reference(0.0)
    end_plus, end_minus, _ = reference(1e3 / j2)
    start_error = abs(start_minus / start_plus / np.exp(PLATEAU.r1.beta) - 1.0)
    end_error = abs(end_minus / end_plus / np.exp(PLATEAU.r2.beta) - 1.0)
    return [
        _check('rate_positivity', lowest, '>= 0', lowest >= 0),
        _check('detailed_balance', max(start_error, end_error), '<= 1e-10', max(start_error, end_error) <= 1e-10),
    ]


def _ball_checks() -> List[Dict]:
    j2 = PLATEAU.at(SYSTEM.omega0).j2
    times = np.array([0.01, 0.1, 1.0, 10.0]) / j2
    radius = ball_radius(PLATEAU, SYSTEM, times)
    closed = ball_center(PLATEAU, SYSTEM, times, 'incomplete_gamma')
    direct = ball_center(PLATEAU, SYSTEM, times, 'quadrature')
    overshoot = float(np.max(radius + np.abs(closed)) - 1.0)
    mismatch = float(np.max(np.abs(closed - direct)))
    return [
        _check('ball_inside_bloch_ball', overshoot, '<= 1e-6', overshoot <= 1e-6),
        _check('center_closed_form', mismatch, '<= 1e-6', mismatch <= 1e-6),
    ]


def _pretherm_checks() -> List[Dict]:
    plateau = detect_pretherm(PLATEAU, SYSTEM)
    control = detect_pretherm(CONTROL, SYSTEM)
    return [
        _check('prethermal_plateau', plateau.t_pr or 0.0, "reason == 'ok'", plateau.reason == 'ok'),
        _check('no_prethermalization_control', control.t_depart or np.nan, "reason == 'no_pretherm'",
               control.reason == 'no_pretherm'),
    ]


def _flux_checks() -> List[Dict]:
    flux = steady_flux(EQUILIBRIUM_FLUX, 'right', ('I', 'I'))
    error = abs(flux / 3.642e-3 - 1.0)
    return [_check('steady_right_flux', flux, '3.642e-3 within 1%', error <= 1e-2)]


def _oracle_checks(sizes: Dict[str, int], threads: int) -> List[Dict]:
    quad = QuadConfig(omega_max_factor=4.0, rel_tol=1e-7)
    bath = discretize(PLATEAU, sizes['N'], sizes['M'], quad.omega_max(PLATEAU))
    _, error = compare_with_quadrature(bath, pairs=ORACLE_PAIRS, quad_cfg=quad, threads=threads)
    return [_check('oracle_vs_quadrature', error, '<= 1e-2', error <= 1e-2)]


def validate(
    oracle: Optional[Dict[str, int]] = None,
    rate_fn: Optional[RateFunction] = None,
    threads: int = 1,
    verbose: bool = True,
) -> Tuple[bool, pd.DataFrame]:
    """
    Run the fast acceptance checks.

    Args:
        oracle: {'N': .., 'M': ..} to add an oracle comparison
        rate_fn: Rate function for the positivity check (closed-form rates by default)
        threads: Worker threads for the oracle
        verbose: Print one line per check

    Returns:
        Tuple of (all passed, table of checks)
    """
    if verbose:
        print("🔬 Prethermal - validation")
        print("=" * 50)

    rate_fn = rate_fn or approx_rate_function(PLATEAU, SYSTEM)
    rows = _rate_checks(rate_fn) + _ball_checks() + _pretherm_checks() + _flux_checks()
    if oracle is not None:
        if verbose:
            print(f"⏳ Oracle comparison with N={oracle['N']}, M={oracle['M']}...")
        rows += _oracle_checks(oracle, threads)

    table = pd.DataFrame(rows)
    passed = bool(table['passed'].all())
    if verbose:
        for row in rows:
            marker = '✅' if row['passed'] else '❌'
            print(f"{marker} {row['check']:<30} {row['value']:.6g}  (target {row['target']})")
        print("=" * 50)
        print("✅ All checks passed" if passed else f"❌ {int((~table['passed']).sum())} checks failed")
    return passed, table
