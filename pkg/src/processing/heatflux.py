"""
Prethermal - Heat Flux Between Two Environments
A qubit between a left and a right hierarchical environment: population
dynamics, energy currents, quasi-stationary states and flux reversals.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from src.dynamics.bloch import IntegratorConfig, PopulationTrace, integrate_population
from src.environment.env_model import CompositeEnvSpec, SystemSpec
from src.errors import DomainError
from src.rates.correlations import approx_rate_function

SIDES = ('left', 'right')
STAGES = ('I', 'II')
FLIP_QUANTITIES = ('right_into_system', 'transport', 'plotted')

# Relative magnitude below which a flux sample counts as zero
NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class TwoEnvSpec:
    """Qubit coupled to two independent hierarchical environments."""
    left: CompositeEnvSpec
    right: CompositeEnvSpec
    sys: SystemSpec = SystemSpec()

    def side(self, name: str) -> CompositeEnvSpec:
        if name not in SIDES:
            raise DomainError(f"unknown side '{name}', choose one of {SIDES}")
        return self.left if name == 'left' else self.right


@dataclass
class FluxRecord:
    """
    Heat currents into the system from each environment.

    Fluxes are stored with the into-system sign; flux_plotted and
    flux_transport are the derived output conventions.
    """
    times: np.ndarray
    rho_pp: np.ndarray
    flux_left: np.ndarray
    flux_right: np.ndarray
    energy: np.ndarray
    flux_at: Callable[[float], Tuple[float, float]]
    trace: Optional[PopulationTrace] = None

    @property
    def flux_plotted(self) -> np.ndarray:
        return self.flux_right - self.flux_left

    @property
    def flux_transport(self) -> np.ndarray:
        return 0.5 * (self.flux_right - self.flux_left)

    def quantity(self, name: str) -> np.ndarray:
        if name == 'right_into_system':
            return self.flux_right
        if name == 'transport':
            return self.flux_transport
        if name == 'plotted':
            return self.flux_plotted
        raise DomainError(f"unknown flux quantity '{name}', choose one of {FLIP_QUANTITIES}")

    def quantity_at(self, name: str, t: float) -> float:
        left, right = self.flux_at(t)
        if name == 'right_into_system':
            return right
        if name == 'transport':
            return 0.5 * (right - left)
        if name == 'plotted':
            return right - left
        raise DomainError(f"unknown flux quantity '{name}', choose one of {FLIP_QUANTITIES}")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'rho_pp': self.rho_pp,
            'energy': self.energy,
            'flux_left': self.flux_left,
            'flux_right': self.flux_right,
            'flux_plotted': self.flux_plotted,
            'flux_transport': self.flux_transport,
        })


def log_time_grid(t_max: float, n_points: int = 4000, t_min: float = 1e-2) -> np.ndarray:
    """0 followed by n_points log-spaced times in [t_min, t_max]."""
    if not 0 < t_min < t_max:
        raise DomainError(f"need 0 < t_min < t_max, got {t_min}, {t_max}")
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, n_points)])


def integrate_two_env(
    spec: TwoEnvSpec,
    rho_pp0: float,
    t_grid: Sequence[float],
    integrator: IntegratorConfig = IntegratorConfig(),
) -> FluxRecord:
    """
    Integrate the population with both environments acting additively.

    J^nu = omega0 [gamma_plus^nu - rho_pp (gamma_plus^nu + gamma_minus^nu)]
    is the heat current from environment nu into the system, and
    E = omega0 (rho_pp - 1/2) its energy.
    """
    omega0 = spec.sys.omega0
    left_rates = approx_rate_function(spec.left, spec.sys)
    right_rates = approx_rate_function(spec.right, spec.sys)

    def total_rates(t: float) -> Tuple[float, float, float]:
        lp, lm, _ = left_rates(t)
        rp, rm, _ = right_rates(t)
        return lp + rp, lm + rm, 0.0

    trace = integrate_population(total_rates, rho_pp0, t_grid, omega0=omega0, integrator=integrator)

    def flux_into(rates, t, rho):
        plus, minus, _ = rates(t)
        return omega0 * (plus - rho * (plus + minus))

    times, rho = trace.times, trace.rho_pp
    flux_left = np.array([flux_into(left_rates, t, r) for t, r in zip(times, rho)])
    flux_right = np.array([flux_into(right_rates, t, r) for t, r in zip(times, rho)])

    def flux_at(t: float) -> Tuple[float, float]:
        r = trace.population_at(t)
        return flux_into(left_rates, t, r), flux_into(right_rates, t, r)

    return FluxRecord(
        times=times,
        rho_pp=rho,
        flux_left=flux_left,
        flux_right=flux_right,
        energy=omega0 * (rho - 0.5),
        flux_at=flux_at,
        trace=trace,
    )


def _stage_occupation(env: CompositeEnvSpec, omega0: float, stage: str) -> float:
    if stage not in STAGES:
        raise DomainError(f"unknown stage '{stage}', choose one of {STAGES}")
    _, j2, n1, n2 = env.at(omega0)
    # without RII the RI occupation persists
    return n2 if stage == 'II' and j2 > 0 else n1


def quasi_stationary_population(spec: TwoEnvSpec, stage_left: str = 'I', stage_right: str = 'I') -> float:
    """
    Stationary rho_pp with each side frozen at the occupation of its stage.

    rho = sum_nu J_I^nu n^nu / sum_nu J_I^nu (2 n^nu + 1)
    """
    omega0 = spec.sys.omega0
    numerator = denominator = 0.0
    for env, stage in ((spec.left, stage_left), (spec.right, stage_right)):
        j1 = env.at(omega0).j1
        n = _stage_occupation(env, omega0, stage)
        numerator += j1 * n
        denominator += j1 * (2.0 * n + 1.0)
    if denominator == 0:
        raise DomainError("both environments are uncoupled from the system")
    return numerator / denominator


def steady_flux(spec: TwoEnvSpec, which: str, stages: Tuple[str, str] = ('II', 'II')) -> float:
    """
    Heat current into the system from one side at the (quasi-)stationary state.

    Args:
        spec: Two-environment setup
        which: 'left' or 'right'
        stages: Stages of (left, right); ('I', 'I') gives the quasi-stationary flux

    Returns:
        omega0 J_I [n - rho (2 n + 1)] for the chosen side
    """
    omega0 = spec.sys.omega0
    rho = quasi_stationary_population(spec, *stages)
    env = spec.side(which)
    n = _stage_occupation(env, omega0, stages[SIDES.index(which)])
    return omega0 * env.at(omega0).j1 * (n - rho * (2.0 * n + 1.0))


def effective_temperature(rho_pp: float, omega0: float = 1.0) -> Tuple[float, bool]:
    """
    Inverse temperature of the thermal state with upper population rho_pp.

    Returns:
        Tuple of (beta_eff, inverted); inverted is True for rho_pp > 1/2
    """
    if not 0 < rho_pp < 1:
        raise DomainError(f"effective temperature needs 0 < rho_pp < 1, got {rho_pp}")
    beta = float(np.log((1.0 - rho_pp) / rho_pp) / omega0)
    return beta, beta < 0


def detect_sign_flips(record: FluxRecord, quantity: str = 'plotted') -> pd.DataFrame:
    """
    Sign changes of a flux quantity, refined on the dense solution.

    Samples below NOISE_FLOOR times the largest magnitude are ignored, so
    numerical zeros of an equilibrium flux do not count as flips.

    Returns:
        DataFrame with columns t_flip, sign_before, sign_after
    """
    values = record.quantity(quantity)
    scale = float(np.max(np.abs(values), initial=0.0))
    rows = []
    if scale == 0:
        return pd.DataFrame(rows, columns=['t_flip', 'sign_before', 'sign_after'])

    significant = np.flatnonzero(np.abs(values) > NOISE_FLOOR * scale)
    signs = np.sign(values[significant])
    for k in np.flatnonzero(signs[1:] != signs[:-1]):
        i, j = significant[k], significant[k + 1]
        t_a, t_b = record.times[i], record.times[j]
        t_flip = bisect(lambda t: record.quantity_at(quantity, t), t_a, t_b, xtol=1e-12 * max(t_b, 1.0))
        rows.append({'t_flip': float(t_flip), 'sign_before': int(signs[k]), 'sign_after': int(signs[k + 1])})
    return pd.DataFrame(rows, columns=['t_flip', 'sign_before', 'sign_after'])


def epoch_stage(env: CompositeEnvSpec, t: float, omega0: float = 1.0) -> str:
    """'I' while RII has not acted yet, 'II' once it has, 'crossover' in between."""
    j2 = env.at(omega0).j2
    if j2 == 0 or t < 0.1 / j2:
        return 'I'
    if t > 10.0 / j2:
        return 'II'
    return 'crossover'


def default_horizon(spec: TwoEnvSpec) -> float:
    """30 / min J_II over coupled sides, or 50 relaxation times without RII."""
    omega0 = spec.sys.omega0
    rates = [env.at(omega0).j2 for env in (spec.left, spec.right)]
    coupled = [j2 for j2 in rates if j2 > 0]
    if coupled:
        return 30.0 / min(coupled)
    relaxation = sum(v.j1 * (2.0 * v.n1 + 1.0) for v in (spec.left.at(omega0), spec.right.at(omega0)))
    if relaxation == 0:
        raise DomainError("both environments are uncoupled from the system")
    return 50.0 / relaxation


def flux_summary(spec: TwoEnvSpec, record: FluxRecord) -> Dict:
    """Closed-form reference values next to the final simulated ones."""
    rho_qs = quasi_stationary_population(spec, 'I', 'I')
    rho_ss = quasi_stationary_population(spec, 'II', 'II')
    beta_eff, inverted = effective_temperature(rho_ss, spec.sys.omega0)
    return {
        'rho_quasi_stationary': rho_qs,
        'rho_steady': rho_ss,
        'rho_final': float(record.rho_pp[-1]),
        'flux_right_steady': steady_flux(spec, 'right'),
        'flux_right_final': float(record.flux_right[-1]),
        'beta_eff_steady': beta_eff,
        'inverted': inverted,
    }
