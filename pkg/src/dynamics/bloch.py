"""
Prethermal - Bloch Dynamics
Time-local master equation of the qubit, and the affine map it induces on the
Bloch ball: rotation about z, contraction by r(t) and displacement c(t) along z.
"""

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import quad, solve_ivp

from src.dynamics.special import continued_gamma, growth, saturation, scaled_upper_gamma
from src.environment.env_model import CompositeEnvSpec, SystemSpec, thermal_polarization
from src.errors import DomainError, IntegrationError
from src.rates.correlations import RateFunction, RateTrace

SOLVER_METHODS = ('LSODA', 'DOP853', 'RK45', 'Radau', 'BDF')
CENTER_METHODS = ('quadrature', 'short_time', 'asymptotic', 'incomplete_gamma')

# Lag integrand exp(-x) is dropped beyond x = LAG_CUT
LAG_CUT = 60.0


@dataclass(frozen=True)
class IntegratorConfig:
    """
    ODE solver settings.

    LSODA switches to a stiff method by itself, which matters on horizons of
    30 / J_II where the rates change on two very different time scales.
    """
    method: str = 'LSODA'
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if self.method not in SOLVER_METHODS:
            raise DomainError(f"unknown solver '{self.method}', choose one of {SOLVER_METHODS}")
        if self.rtol <= 0 or self.atol <= 0:
            raise DomainError("solver tolerances must be > 0")


@dataclass(frozen=True)
class BlochState:
    """
    Qubit state as a Bloch vector p, rho = (1 + p . sigma) / 2.

    Args:
        p: (p_x, p_y, p_z) with |p| <= 1
    """
    p: Tuple[float, float, float]

    def __post_init__(self):
        vector = tuple(float(x) for x in np.asarray(self.p, dtype=float).ravel())
        if len(vector) != 3:
            raise DomainError(f"Bloch vector needs 3 components, got {len(vector)}")
        if not np.all(np.isfinite(vector)) or np.linalg.norm(vector) > 1.0 + 1e-9:
            raise DomainError(f"Bloch vector {vector} lies outside the unit ball")
        object.__setattr__(self, 'p', vector)

    @classmethod
    def thermal(cls, beta: float, omega0: float = 1.0) -> "BlochState":
        return cls((0.0, 0.0, thermal_polarization(beta, omega0)))

    @classmethod
    def from_elements(cls, rho_pp: float, rho_pm: complex = 0.0) -> "BlochState":
        return cls((2.0 * np.real(rho_pm), -2.0 * np.imag(rho_pm), 2.0 * rho_pp - 1.0))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.p)

    @property
    def rho_pp(self) -> float:
        return 0.5 * (1.0 + self.p[2])

    @property
    def rho_pm(self) -> complex:
        return 0.5 * (self.p[0] - 1j * self.p[1])

    def density_matrix(self) -> np.ndarray:
        """2x2 density matrix in the (|+>, |->) basis."""
        return np.array([
            [self.rho_pp, self.rho_pm],
            [np.conj(self.rho_pm), 1.0 - self.rho_pp],
        ], dtype=complex)


@dataclass(frozen=True)
class BallSnapshot:
    """Image of the Bloch ball at one time: radius, z-center and rotation angle."""
    time: float
    radius: float
    center: float
    phase: float

    def __post_init__(self):
        if self.radius < 0 or self.radius + abs(self.center) > 1.0 + 1e-6:
            raise DomainError(
                f"ball at t={self.time:.6g} leaves the Bloch ball "
                f"(radius {self.radius:.6g}, center {self.center:.6g})"
            )

    def apply(self, p0: Sequence[float]) -> np.ndarray:
        """Map an initial Bloch vector to its image at this time."""
        px, py, pz = np.asarray(p0, dtype=float)
        cos, sin = np.cos(self.phase), np.sin(self.phase)
        return np.array([
            self.radius * (px * cos - py * sin),
            self.radius * (px * sin + py * cos),
            self.radius * pz + self.center,
        ])


class PrethermCondition(NamedTuple):
    ratio: float
    satisfied: bool
    threshold: float


@dataclass
class PopulationTrace:
    """Solution of the master equation sampled on the requested grid."""
    times: np.ndarray
    rho_pp: np.ndarray
    rho_pm: np.ndarray
    solution: object = None
    omega0: float = 1.0

    def bloch_vectors(self) -> np.ndarray:
        """(T, 3) array of Bloch vectors."""
        return np.column_stack([
            2.0 * self.rho_pm.real,
            -2.0 * self.rho_pm.imag,
            2.0 * self.rho_pp - 1.0,
        ])

    def population_at(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Upper-level population from the dense solution, at any solved time."""
        if self.solution is None or self.solution.sol is None:
            raise DomainError("trace was built without a dense solution")
        value = self.solution.sol(t)[0]
        return value if np.ndim(value) else float(value)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'rho_pp': self.rho_pp,
            'rho_pm_re': self.rho_pm.real,
            'rho_pm_im': self.rho_pm.imag,
            'rho_pm_abs': np.abs(self.rho_pm),
            'p_z': 2.0 * self.rho_pp - 1.0,
        })


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------

def _check_time_grid(t_grid: Sequence[float]) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise DomainError("time grid needs at least two points")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing and start at t >= 0")
    return times


def integrate_population(
    rates: Union[RateFunction, RateTrace],
    rho_pp0: float,
    t_grid: Sequence[float],
    rho_pm0: complex = 0.0,
    omega0: float = 1.0,
    lamb_shift: bool = True,
    integrator: IntegratorConfig = IntegratorConfig(),
    events: Optional[List[Callable]] = None,
) -> PopulationTrace:
    """
    Solve the master equation for the populations and the coherence.

    d rho_pp / dt = gamma_plus - rho_pp (gamma_plus + gamma_minus)
    d rho_pm / dt = [-i (omega0 + delta_omega) - (gamma_plus + gamma_minus)] rho_pm

    The coherence is carried in the frame rotating at omega0, so the solver
    only resolves the slow envelope.

    Args:
        rates: Rate function t -> (gamma_plus, gamma_minus, delta_omega), or a RateTrace
        rho_pp0: Initial upper-level population
        t_grid: Output times (strictly increasing, first entry is the start)
        rho_pm0: Initial coherence
        omega0: Level splitting
        lamb_shift: Include delta_omega in the coherence phase
        integrator: Solver settings
        events: scipy solve_ivp event functions of (t, y), y = [rho_pp, Re, Im]
            of the rotating-frame coherence

    Returns:
        PopulationTrace; the solve_ivp result (events included) is kept in .solution
    """
    times = _check_time_grid(t_grid)
    if not 0.0 <= rho_pp0 <= 1.0:
        raise DomainError(f"population must lie in [0, 1], got {rho_pp0}")
    if abs(rho_pm0) ** 2 > rho_pp0 * (1.0 - rho_pp0) + 1e-12:
        raise DomainError("initial coherence violates positivity")
    rate_fn = rates.interpolant() if isinstance(rates, RateTrace) else rates

    def rhs(t, y):
        gamma_plus, gamma_minus, delta_omega = rate_fn(t)
        total = gamma_plus + gamma_minus
        shift = delta_omega if lamb_shift else 0.0
        return [
            gamma_plus - y[0] * total,
            shift * y[2] - total * y[1],
            -shift * y[1] - total * y[2],
        ]

    start = complex(rho_pm0) * np.exp(1j * omega0 * times[0])
    solution = solve_ivp(
        rhs,
        (times[0], times[-1]),
        [rho_pp0, start.real, start.imag],
        method=integrator.method,
        t_eval=times,
        rtol=integrator.rtol,
        atol=integrator.atol,
        dense_output=True,
        events=events,
    )
    if solution.status < 0:
        reached = float(solution.t[-1]) if solution.t.size else None
        raise IntegrationError(f"master equation solver failed: {solution.message}", reached)

    solved = solution.t
    rotating = solution.y[1] + 1j * solution.y[2]
    return PopulationTrace(
        times=solved,
        rho_pp=solution.y[0],
        rho_pm=rotating * np.exp(-1j * omega0 * solved),
        solution=solution,
        omega0=omega0,
    )


# ---------------------------------------------------------------------------
# Ball of accessible states (closed-form rates)
# ---------------------------------------------------------------------------

def accumulated_decay(spec: CompositeEnvSpec, sys: SystemSpec,
                      t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Gamma(t) = int_0^t (gamma_plus + gamma_minus) ds for the closed-form rates.

    J_I [(2 n_II + 1) t + 2 (n_I - n_II) (1 - exp(-J_II t)) / J_II]
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError("accumulated decay is defined for t >= 0")
    j1, j2, n1, n2 = spec.at(sys.omega0)
    value = j1 * ((2.0 * n2 + 1.0) * np.asarray(t, dtype=float)
                  + 2.0 * (n1 - n2) * saturation(j2, t))
    return value if np.ndim(value) else float(value)


def ball_radius(spec: CompositeEnvSpec, sys: SystemSpec,
                t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Contraction factor r(t) = exp(-Gamma(t)) of the Bloch ball."""
    value = np.exp(-np.asarray(accumulated_decay(spec, sys, t)))
    return value if np.ndim(value) else float(value)


def _center_quadrature(spec: CompositeEnvSpec, sys: SystemSpec, t: float) -> float:
    j1, j2, n1, n2 = spec.at(sys.omega0)
    if j1 == 0 or t == 0:
        return 0.0
    slowest = j1 * (2.0 * min(n1, n2) + 1.0)
    cut = min(t, LAG_CUT / slowest)
    fade = np.exp(-j2 * t)

    def integrand(lag: float) -> float:
        lost = j1 * ((2.0 * n2 + 1.0) * lag + 2.0 * (n1 - n2) * fade * growth(j2, lag))
        return np.exp(-lost)

    fastest = j1 * (2.0 * max(n1, n2) + 1.0)
    points = [p for p in (1.0 / fastest, 10.0 / fastest, 1.0 / slowest, 10.0 / slowest) if p < cut]
    value, _ = quad(integrand, 0.0, cut, points=points or None,
                    epsabs=1e-13, epsrel=1e-11, limit=500)
    return -j1 * value


def _center_incomplete_gamma(spec: CompositeEnvSpec, sys: SystemSpec, t: float) -> float:
    j1, j2, n1, n2 = spec.at(sys.omega0)
    if j1 == 0 or t == 0:
        return 0.0
    if j2 == 0:
        return _center_short_time(spec, sys, t)
    b = (2.0 * n2 + 1.0) * j1 / j2
    a = 2.0 * (n1 - n2) * j1 / j2
    fade = np.exp(-j2 * t)
    if a == 0:
        return -j1 * saturation(j1 * (2.0 * n2 + 1.0), t)
    if a > 0:
        # difference of two Gamma(-b, .) tails, rescaled by z**b exp(z)
        head = scaled_upper_gamma(b, a * fade)
        tail = np.exp(b * np.log(fade) - a * (1.0 - fade)) * scaled_upper_gamma(b, a)
        return -(j1 / j2) * (head - tail)
    return -(j1 / j2) * continued_gamma(b, a * fade, np.expm1(j2 * t))


def _center_short_time(spec: CompositeEnvSpec, sys: SystemSpec, t: float) -> float:
    j1, _, n1, _ = spec.at(sys.omega0)
    return -j1 * saturation(j1 * (2.0 * n1 + 1.0), t)


def _center_asymptotic(spec: CompositeEnvSpec, sys: SystemSpec, t: float) -> float:
    _, _, _, n2 = spec.at(sys.omega0)
    return -1.0 / (2.0 * n2 + 1.0)


_CENTER_FORMS = {
    'quadrature': _center_quadrature,
    'short_time': _center_short_time,
    'asymptotic': _center_asymptotic,
    'incomplete_gamma': _center_incomplete_gamma,
}


def ball_center(
    spec: CompositeEnvSpec,
    sys: SystemSpec,
    t: Union[float, np.ndarray],
    method: str = 'incomplete_gamma',
) -> Union[float, np.ndarray]:
    """
    z-displacement c(t) of the ball center.

    c(t) = -J_I int_0^t exp(-[Gamma(t) - Gamma(t - s)]) ds, evaluated as

    - 'quadrature': the lag integral itself
    - 'short_time': RI alone, [exp(-J_I (2 n_I + 1) t) - 1] / (2 n_I + 1)
    - 'asymptotic': the long time limit -1 / (2 n_II + 1)
    - 'incomplete_gamma': closed form through upper incomplete gamma
      functions with negative parameter (continued when n_I < n_II)
    """
    if method not in _CENTER_FORMS:
        raise DomainError(f"unknown center method '{method}', choose one of {CENTER_METHODS}")
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("ball center is defined for t >= 0")
    form = _CENTER_FORMS[method]
    if times.ndim == 0:
        return float(form(spec, sys, float(times)))
    return np.array([form(spec, sys, float(x)) for x in times.ravel()]).reshape(times.shape)


def ball_snapshot(spec: CompositeEnvSpec, sys: SystemSpec, t: float,
                  method: str = 'incomplete_gamma') -> BallSnapshot:
    return BallSnapshot(
        time=float(t),
        radius=ball_radius(spec, sys, t),
        center=ball_center(spec, sys, t, method),
        phase=sys.omega0 * float(t),
    )


def bloch_map(spec: CompositeEnvSpec, sys: SystemSpec, p0: Sequence[float], t: float,
              method: str = 'incomplete_gamma') -> np.ndarray:
    """
    Evolve a Bloch vector with the closed-form rates through the ball map.

    Args:
        spec: Composite environment
        sys: Two-level system
        p0: Initial Bloch vector
        t: Time (>= 0)
        method: Center evaluation, see ball_center

    Returns:
        Bloch vector at time t
    """
    BlochState(tuple(p0))
    return ball_snapshot(spec, sys, t, method).apply(p0)


def pretherm_condition(spec: CompositeEnvSpec, sys: SystemSpec,
                       threshold: float = 1e2) -> PrethermCondition:
    """
    Time-scale separation J_I (2 n_I + 1) / J_II between contraction and RII drive.

    Infinite when RII is uncoupled.
    """
    j1, j2, n1, _ = spec.at(sys.omega0)
    ratio = np.inf if j2 == 0 else j1 * (2.0 * n1 + 1.0) / j2
    return PrethermCondition(float(ratio), bool(ratio >= threshold), float(threshold))


def default_horizon(spec: CompositeEnvSpec, sys: SystemSpec) -> float:
    """30 / J_II(omega0), the time by which the RII-driven relaxation is over."""
    j2 = spec.at(sys.omega0).j2
    if j2 <= 0:
        raise DomainError("RII is uncoupled (J_II = 0); pass an explicit horizon")
    return 30.0 / j2
