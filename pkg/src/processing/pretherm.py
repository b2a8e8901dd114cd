"""
Prethermal - Prethermalization Detection
Finds the contraction, departure and thermalization times of a qubit that
starts in equilibrium with RI, and scans the prethermal lifetime t_pr over
bath parameters.
"""

import copy
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from dotenv import load_dotenv
load_dotenv()

from src.dynamics.bloch import (
    BlochState,
    IntegratorConfig,
    ball_radius,
    integrate_population,
)
from src.environment.env_model import CompositeEnvSpec, SystemSpec
from src.errors import DomainError, PrethermalError
from src.rates.correlations import RateFunction, approx_rate_function

SCAN_AXES = ('beta_II', 'beta_I', 'g_II')
REASONS = ('ok', 'no_pretherm', 'indistinguishable', 'undefined')

# LSODA wraps a Fortran solver that holds one problem at a time
THREAD_SAFE_METHOD = 'Radau'

DEFAULT_THREADS = int(os.environ.get('PRETHERMAL_THREADS', 4))
DEFAULT_OUT_DIR = os.environ.get('PRETHERMAL_OUT_DIR', 'output')


@dataclass
class PrethermResult:
    """
    Outcome of one prethermalization run.

    t_pr = t_depart - t_contract is set only when reason == 'ok'.
    """
    t_contract: Optional[float]
    t_depart: Optional[float]
    t_pr: Optional[float]
    t_thermalize: Optional[float]
    reason: str
    thermal_distance: float
    diagnostic: str = ''

    def __post_init__(self):
        if self.reason not in REASONS:
            raise DomainError(f"unknown reason '{self.reason}'")
        if self.reason == 'ok' and not (self.t_pr is not None and self.t_pr > 0):
            raise DomainError("a prethermal result needs t_pr > 0")

    def to_dict(self) -> Dict:
        return asdict(self)


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    n_points: int


def trace_distance(rho_1: Union[BlochState, np.ndarray], rho_2: Union[BlochState, np.ndarray]) -> float:
    """
    Trace distance between two qubit states.

    Bloch states give |p1 - p2| / 2; density matrices give half the sum of
    the absolute eigenvalues of their difference.
    """
    if isinstance(rho_1, BlochState) and isinstance(rho_2, BlochState):
        return float(0.5 * np.linalg.norm(rho_1.vector - rho_2.vector))
    a = rho_1.density_matrix() if isinstance(rho_1, BlochState) else np.asarray(rho_1, dtype=complex)
    b = rho_2.density_matrix() if isinstance(rho_2, BlochState) else np.asarray(rho_2, dtype=complex)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise DomainError("trace distance expects 2x2 density matrices or Bloch states")
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


def with_axis_value(template: CompositeEnvSpec, axis: str, value: float) -> CompositeEnvSpec:
    """Copy of template with one scan parameter replaced."""
    if axis == 'beta_II':
        return replace(template, r2=replace(template.r2, beta=value))
    if axis == 'beta_I':
        return replace(template, r1=replace(template.r1, beta=value))
    if axis == 'g_II':
        return replace(template, r2=replace(template.r2, spectral=replace(template.r2.spectral, g=value)))
    raise DomainError(f"unknown scan axis '{axis}', choose one of {SCAN_AXES}")


class PrethermDetector:
    """
    Detects prethermal plateaus of the qubit population.

    The algorithm:
    1. Start in the thermal state of RI (beta_I)
    2. Contraction: first time the ball radius drops to 0.1
    3. Departure: first time the state is d_pr away from the RI thermal state
    4. A plateau exists when departure happens after contraction
    5. Thermalization (within d_pr of the RII thermal state) is reported
       alongside but does not enter t_pr
    """

    THRESHOLDS = {
        'd_pr': 1e-2,                 # Trace distance resolving two states
        'contraction_radius': 0.1,    # Ball radius marking contraction
        'horizon_factor': 30.0,       # Default horizon in units of 1 / J_II
        'n_points': 2000,             # Output samples per trajectory
    }

    def __init__(
        self,
        sys: SystemSpec = SystemSpec(),
        d_pr: Optional[float] = None,
        integrator: IntegratorConfig = IntegratorConfig(),
    ):
        """
        Initialize the detector.

        Args:
            sys: Two-level system
            d_pr: Distinguishability threshold (defaults to THRESHOLDS['d_pr'])
            integrator: ODE solver settings
        """
        self.sys = sys
        self.d_pr = self.THRESHOLDS['d_pr'] if d_pr is None else d_pr
        if not 0 < self.d_pr < 1:
            raise DomainError(f"d_pr must lie in (0, 1), got {self.d_pr}")
        self.integrator = integrator

    def _thread_safe(self) -> "PrethermDetector":
        """This detector, or a copy on THREAD_SAFE_METHOD when it integrates with LSODA."""
        if self.integrator.method != 'LSODA':
            return self
        twin = copy.copy(self)
        twin.integrator = replace(self.integrator, method=THREAD_SAFE_METHOD)
        return twin

    def _horizon(self, spec: CompositeEnvSpec, t_max: Optional[float]) -> float:
        if t_max is not None:
            if t_max <= 0:
                raise DomainError(f"t_max must be > 0, got {t_max}")
            return float(t_max)
        j2 = spec.at(self.sys.omega0).j2
        if j2 <= 0:
            raise DomainError("RII is uncoupled (J_II = 0); pass t_max explicitly")
        return self.THRESHOLDS['horizon_factor'] / j2

    def contraction_time(
        self,
        spec: CompositeEnvSpec,
        t_max: float,
        rates: Optional[RateFunction] = None,
    ) -> Optional[float]:
        """
        First time the ball radius reaches THRESHOLDS['contraction_radius'].

        Returns None when the radius stays above it up to t_max.
        """
        target = self.THRESHOLDS['contraction_radius']
        if rates is None:
            if ball_radius(spec, self.sys, t_max) > target:
                return None
            return float(brentq(lambda t: ball_radius(spec, self.sys, t) - target, 0.0, t_max,
                                xtol=1e-12, rtol=1e-12))

        # custom rates: accumulate the decay and stop at -log(target)
        def crossed(t, y):
            return y[0] + np.log(target)
        crossed.terminal = True
        crossed.direction = 1

        solution = solve_ivp(
            lambda t, y: [sum(rates(t)[:2])],
            (0.0, t_max), [0.0],
            method=self.integrator.method,
            rtol=self.integrator.rtol,
            atol=self.integrator.atol,
            events=[crossed],
        )
        hits = solution.t_events[0]
        return float(hits[0]) if hits.size else None

    def detect(
        self,
        spec: CompositeEnvSpec,
        t_max: Optional[float] = None,
        rates: Optional[RateFunction] = None,
    ) -> PrethermResult:
        """
        Run one trajectory from the RI thermal state and classify it.

        Args:
            spec: Composite environment
            t_max: Horizon (defaults to 30 / J_II)
            rates: Rate function; the closed-form rates when omitted

        Returns:
            PrethermResult
        """
        omega0 = self.sys.omega0
        start = BlochState.thermal(spec.r1.beta, omega0)
        target = BlochState.thermal(spec.r2.beta, omega0)
        distance = trace_distance(start, target)

        if distance < self.d_pr:
            return PrethermResult(None, None, None, None, 'indistinguishable', distance,
                                  f"thermal states are only {distance:.3e} apart")

        horizon = self._horizon(spec, t_max)
        t_contract = self.contraction_time(spec, horizon, rates)
        rate_fn = rates if rates is not None else approx_rate_function(spec, self.sys)

        pz_start, pz_target, d_pr = start.p[2], target.p[2], self.d_pr

        def departed(t, y):
            return 0.5 * abs(2.0 * y[0] - 1.0 - pz_start) - d_pr
        departed.direction = 1

        def thermalized(t, y):
            return d_pr - 0.5 * abs(2.0 * y[0] - 1.0 - pz_target)
        thermalized.direction = 1

        trace = integrate_population(
            rate_fn,
            start.rho_pp,
            np.linspace(0.0, horizon, int(self.THRESHOLDS['n_points'])),
            omega0=omega0,
            integrator=self.integrator,
            events=[departed, thermalized],
        )
        departures, arrivals = trace.solution.t_events
        t_depart = float(departures[0]) if departures.size else None
        t_thermalize = float(arrivals[0]) if arrivals.size else None

        missing = [name for name, value in (('contraction', t_contract), ('departure', t_depart))
                   if value is None]
        if t_depart is None:
            return PrethermResult(t_contract, t_depart, None, t_thermalize, 'undefined', distance,
                                  f"no {' or '.join(missing)} before t_max={horizon:.6g}")
        if t_contract is None or t_depart <= t_contract:
            contraction = 'any contraction' if t_contract is None else f"contraction at {t_contract:.6g}"
            return PrethermResult(t_contract, t_depart, None, t_thermalize, 'no_pretherm', distance,
                                  f"departure at {t_depart:.6g} precedes {contraction}")
        note = '' if t_thermalize is not None else f"no thermalization before t_max={horizon:.6g}"
        return PrethermResult(t_contract, t_depart, t_depart - t_contract, t_thermalize, 'ok', distance, note)

    def _failed(self, template: CompositeEnvSpec, axis: str, value: float, message: str) -> PrethermResult:
        """'undefined' result for a scan point that raised."""
        beta_I = value if axis == 'beta_I' else template.r1.beta
        beta_II = value if axis == 'beta_II' else template.r2.beta
        omega0 = self.sys.omega0
        distance = 0.5 * abs(np.tanh(0.5 * beta_I * omega0) - np.tanh(0.5 * beta_II * omega0))
        return PrethermResult(None, None, None, None, 'undefined', float(distance), message)

    def scan(
        self,
        template: CompositeEnvSpec,
        axis: str,
        values: Sequence[float],
        t_max: Optional[float] = None,
        threads: int = 1,
        verbose: bool = True,
    ) -> pd.DataFrame:
        """
        Detect t_pr for every value of one bath parameter.

        Args:
            template: Environment whose other parameters are kept
            axis: 'beta_II', 'beta_I' or 'g_II'
            values: Parameter values, reported in input order
            t_max: Common horizon (per-point default when omitted)
            threads: Worker threads; more than one swaps LSODA for THREAD_SAFE_METHOD
            verbose: Print progress

        Returns:
            DataFrame with one row per value; points that raise are reported
            as 'undefined' with the error in 'diagnostic'
        """
        if axis not in SCAN_AXES:
            raise DomainError(f"unknown scan axis '{axis}', choose one of {SCAN_AXES}")

        detector = self._thread_safe() if threads > 1 else self

        def point(value: float) -> Dict:
            row = {'axis': axis, 'axis_value': float(value)}
            try:
                result = detector.detect(with_axis_value(template, axis, value), t_max=t_max)
            except PrethermalError as e:
                if verbose:
                    print(f"⚠️ {axis}={value:g} failed: {e}")
                result = self._failed(template, axis, value, str(e))
            except Exception as e:
                if verbose:
                    print(f"❌ {axis}={value:g} raised {type(e).__name__}: {e}")
                result = self._failed(template, axis, value, f"{type(e).__name__}: {e}")
            row.update({
                'thermal_trace_distance': result.thermal_distance,
                't_contract': result.t_contract,
                't_depart': result.t_depart,
                't_pr': result.t_pr,
                't_thermalize': result.t_thermalize,
                'reason': result.reason,
                'diagnostic': result.diagnostic,
            })
            return row

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            rows = list(pool.map(point, values))
        table = pd.DataFrame(rows)
        for column in ('t_contract', 't_depart', 't_pr', 't_thermalize'):
            table[column] = table[column].astype(float)
        return table


def detect_pretherm(
    spec: CompositeEnvSpec,
    sys: SystemSpec = SystemSpec(),
    d_pr: float = 1e-2,
    t_max: Optional[float] = None,
    rates: Optional[RateFunction] = None,
    integrator: IntegratorConfig = IntegratorConfig(),
) -> PrethermResult:
    return PrethermDetector(sys, d_pr, integrator).detect(spec, t_max=t_max, rates=rates)


def scan_tpr(
    template: CompositeEnvSpec,
    sys: SystemSpec,
    axis: str,
    values: Sequence[float],
    d_pr: float = 1e-2,
    threads: int = 1,
    t_max: Optional[float] = None,
    integrator: IntegratorConfig = IntegratorConfig(),
    verbose: bool = False,
) -> pd.DataFrame:
    return PrethermDetector(sys, d_pr, integrator).scan(template, axis, values, t_max, threads, verbose)


def fit_scaling(table: pd.DataFrame) -> ScalingFit:
    """
    Least-squares slope of log t_pr against log axis_value over the 'ok' rows.

    For a g_II scan the expected slope is -1.
    """
    ok = table[table['reason'] == 'ok']
    if len(ok) < 2:
        raise DomainError(f"need at least two prethermal points to fit a slope, got {len(ok)}")
    slope, intercept = np.polyfit(np.log(ok['axis_value'].to_numpy(float)),
                                  np.log(ok['t_pr'].to_numpy(float)), 1)
    return ScalingFit(float(slope), float(intercept), int(len(ok)))


def run_scan(
    template: CompositeEnvSpec,
    axis: str,
    values: Sequence[float],
    sys: SystemSpec = SystemSpec(),
    d_pr: float = 1e-2,
    threads: int = DEFAULT_THREADS,
    out_dir: Optional[Union[str, Path]] = None,
    name: str = 'tpr_scan',
    verbose: bool = True,
) -> pd.DataFrame:
    """
    Scan t_pr over one parameter, save the table and print a summary.

    Args:
        template: Environment whose other parameters are kept
        axis: Scan parameter
        values: Parameter values
        sys: Two-level system
        d_pr: Distinguishability threshold
        threads: Worker threads
        out_dir: Output directory (PRETHERMAL_OUT_DIR by default)
        name: CSV file stem
        verbose: Print progress and summary

    Returns:
        DataFrame with scan results
    """
    if verbose:
        print("🔬 Prethermal - t_pr scan")
        print("=" * 50)
        print(f"📋 {len(values)} values of {axis}")
        print("⏳ Integrating trajectories...")

    table = scan_tpr(template, sys, axis, values, d_pr=d_pr, threads=threads, verbose=verbose)

    output_dir = Path(out_dir or DEFAULT_OUT_DIR)
    output_dir.mkdir(parents=True, exist_ok=True)
    output_file = output_dir / f'{name}.csv'
    table.to_csv(output_file, index=False, float_format='%.17g')

    if verbose:
        ok = table[table['reason'] == 'ok']
        print()
        print("=" * 50)
        print(f"✅ Scan complete! {len(ok)} of {len(table)} points prethermalize")
        for reason in REASONS[1:]:
            count = int((table['reason'] == reason).sum())
            if count:
                print(f"⚠️ {count} points: {reason}")
        if axis == 'g_II' and len(ok) >= 2:
            fit = fit_scaling(table)
            print(f"📈 log-log slope of t_pr vs g_II: {fit.slope:.3f}")
        print(f"📁 Results saved to: {output_file}")

    return table


if __name__ == "__main__":
    import argparse

    from src.environment.env_model import composite_env

    parser = argparse.ArgumentParser(description='Prethermal t_pr scan')
    parser.add_argument('--axis', choices=SCAN_AXES, default='g_II', help='Scan parameter')
    parser.add_argument('--values', type=float, nargs='+', default=[1e-6, 3e-6, 1e-5, 3e-5],
                        help='Parameter values')
    parser.add_argument('--g-i', type=float, default=1e-2, help='RI coupling')
    parser.add_argument('--g-ii', type=float, default=1e-5, help='RII coupling')
    parser.add_argument('--beta-i', type=float, default=1.1, help='RI inverse temperature')
    parser.add_argument('--beta-ii', type=float, default=0.5, help='RII inverse temperature')
    parser.add_argument('--threads', type=int, default=DEFAULT_THREADS, help='Worker threads')
    args = parser.parse_args()

    run_scan(composite_env(args.g_i, args.g_ii, args.beta_i, args.beta_ii),
             args.axis, args.values, threads=args.threads)
