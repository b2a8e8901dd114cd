"""
Prethermal - Correlation Functions and Decay Rates
Non-stationary two-time correlations of the hierarchical environment and the
canonical decay rates / Lamb shift of the time-local master equation.

Conventions:
- |g_lambda|^2 = J_I(omega_lambda) d_omega / (2 pi), so the RI term carries
  1/(2 pi) and the RII term 1/(4 pi^2).
- alpha(t, t_prime) takes the lag t_prime = t - tau as second argument.
- Every RI mode is damped at gamma(omega) = J_II(omega) / 2; the principal
  value part of that damping is dropped.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from src.environment.env_model import CompositeEnvSpec, SystemSpec
from src.errors import DomainError
from src.rates.quadrature import (
    QuadConfig,
    damped_window,
    exp_window,
    integrate_frequency,
)

# t -> (gamma_plus, gamma_minus, delta_omega)
RateFunction = Callable[[float], Tuple[float, float, float]]

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi ** 2

# Offsets (in units of the local kernel half width) where the inner panels are split
KERNEL_BREAKS = (-100.0, -10.0, -1.0, 1.0, 10.0, 100.0)


class KernelEval(NamedTuple):
    omega: float
    omega_prime: float
    value: float


@dataclass
class RateTrace:
    """
    Sampled canonical decay rates and frequency shift.

    gamma_plus_lt / gamma_minus_lt hold the RII-induced (long time) part when
    the producing method separates it; the short time part is the remainder.
    """
    times: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    delta_omega: np.ndarray
    gamma_plus_lt: Optional[np.ndarray] = None
    gamma_minus_lt: Optional[np.ndarray] = None
    source: str = 'approx'

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise DomainError("rate trace needs a non-empty 1-D time grid")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("rate trace times must be strictly increasing")
        for name in ('gamma_plus', 'gamma_minus', 'delta_omega', 'gamma_plus_lt', 'gamma_minus_lt'):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if value.shape != self.times.shape:
                raise DomainError(f"{name} has shape {value.shape}, expected {self.times.shape}")
            setattr(self, name, value)

    def to_frame(self) -> pd.DataFrame:
        data = {
            't': self.times,
            'gamma_plus': self.gamma_plus,
            'gamma_minus': self.gamma_minus,
            'delta_omega': self.delta_omega,
        }
        if self.gamma_plus_lt is not None:
            data['gamma_plus_st'] = self.gamma_plus - self.gamma_plus_lt
            data['gamma_plus_lt'] = self.gamma_plus_lt
        if self.gamma_minus_lt is not None:
            data['gamma_minus_st'] = self.gamma_minus - self.gamma_minus_lt
            data['gamma_minus_lt'] = self.gamma_minus_lt
        return pd.DataFrame(data)

    def interpolant(self) -> RateFunction:
        """Cubic-spline rate function valid on [times[0], times[-1]]."""
        if self.times.size < 2:
            raise DomainError("need at least two samples to interpolate a rate trace")
        splines = [CubicSpline(self.times, column) for column in
                   (self.gamma_plus, self.gamma_minus, self.delta_omega)]
        start, stop = self.times[0], self.times[-1]

        def rates(t: float) -> Tuple[float, float, float]:
            s = min(max(t, start), stop)
            return tuple(float(spline(s)) for spline in splines)

        return rates


# ---------------------------------------------------------------------------
# Kernel and correlation functions
# ---------------------------------------------------------------------------

def lorentzian_kernel(
    spec: CompositeEnvSpec,
    omega: Union[float, np.ndarray],
    omega_prime: Union[float, np.ndarray],
) -> Union[float, np.ndarray]:
    """
    K(omega, omega') = J_II(omega') / [(J_II(omega)/2)^2 + (omega - omega')^2].

    Returns 0 where J_II(omega') vanishes (including the 0/0 case of an
    uncoupled RII).
    """
    w = np.asarray(omega, dtype=float)
    wp = np.asarray(omega_prime, dtype=float)
    if np.any(w < 0) or np.any(wp < 0):
        raise DomainError("kernel frequencies must be >= 0")
    numerator = np.asarray(spec.j2(wp), dtype=float)
    width = 0.5 * np.asarray(spec.j2(w), dtype=float)
    denominator = width ** 2 + (w - wp) ** 2
    positive = numerator > 0
    value = np.where(positive, numerator / np.where(positive & (denominator > 0), denominator, 1.0), 0.0)
    return value if value.ndim else float(value)


def kernel_point(spec: CompositeEnvSpec, omega: float, omega_prime: float) -> KernelEval:
    """Single kernel evaluation tagged with its frequencies."""
    return KernelEval(float(omega), float(omega_prime), lorentzian_kernel(spec, omega, omega_prime))


def _rii_integral(
    spec: CompositeEnvSpec,
    quad_cfg: QuadConfig,
    oscillation: float,
    inner: Callable[[float, np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    label: str,
) -> np.ndarray:
    """
    (1/4 pi^2) * int d omega J_I(omega) int d omega' inner(omega, omega').

    The inner integral is split around the Lorentzian resonance omega' = omega
    and runs on vectorised panels; the outer one goes through quad_vec.
    """
    omega_max = quad_cfg.omega_max(spec)
    inner_cfg = quad_cfg.tighter()
    s_inner = spec.r2.spectral.s

    def outer(omegas: np.ndarray) -> np.ndarray:
        rows = []
        for omega in omegas:
            width = 0.5 * spec.j2(omega)
            points = [omega] + [omega + k * width for k in KERNEL_BREAKS]
            value, _ = integrate_frequency(
                partial(inner, omega),
                omega_max,
                inner_cfg.abs_tol,
                inner_cfg.rel_tol,
                quad_cfg.max_panels,
                oscillation=oscillation,
                breakpoints=points,
                exponent=s_inner,
                label=f"{label} (inner, omega={omega:.6g})",
                vectorised=True,
            )
            rows.append(value)
        weight = np.asarray(spec.j1(omegas), dtype=float)
        return np.asarray(rows) * weight.reshape((-1,) + (1,) * (np.ndim(rows) - 1))

    value, _ = integrate_frequency(
        outer,
        omega_max,
        quad_cfg.abs_tol,
        quad_cfg.rel_tol,
        quad_cfg.max_panels,
        oscillation=oscillation,
        breakpoints=breakpoints,
        exponent=spec.r1.spectral.s,
        label=label,
    )
    return value / FOUR_PI_SQ


def correlation_pair(
    spec: CompositeEnvSpec,
    t: float,
    t_prime: float,
    quad_cfg: QuadConfig = QuadConfig(),
) -> Tuple[complex, complex]:
    """
    Evaluate alpha_plus(t, t') and alpha_minus(t, t') from one quadrature.

    Args:
        spec: Composite environment
        t: Later time (>= 0)
        t_prime: Lag, 0 <= t_prime <= t
        quad_cfg: Quadrature settings

    Returns:
        Tuple of (alpha_plus, alpha_minus)
    """
    if not 0 <= t_prime <= t:
        raise DomainError(f"need 0 <= t_prime <= t, got t={t}, t_prime={t_prime}")
    tau = t - t_prime
    omega_max = quad_cfg.omega_max(spec)

    def ri_term(omega: np.ndarray) -> np.ndarray:
        gamma = 0.5 * np.asarray(spec.j2(omega))
        phase = np.exp(1j * omega * t_prime - gamma * (2.0 * t - t_prime))
        weight = np.asarray(spec.j1(omega))
        occupation = np.asarray(spec.n1(omega))
        return np.stack([
            weight * occupation * phase,
            weight * (occupation + 1.0) * np.conj(phase),
        ], axis=-1) / TWO_PI

    value, _ = integrate_frequency(
        ri_term,
        omega_max,
        quad_cfg.abs_tol,
        quad_cfg.rel_tol,
        quad_cfg.max_panels,
        oscillation=t_prime,
        exponent=spec.r1.spectral.s,
        label="RI correlation term",
    )

    if spec.r2.spectral.g > 0 and t > 0:
        def rii_factor(omega: float, omega_prime: np.ndarray) -> np.ndarray:
            gamma = 0.5 * spec.j2(omega)
            left = np.exp(1j * omega_prime * t) - np.exp((1j * omega - gamma) * t)
            right = np.exp(-1j * omega_prime * tau) - np.exp(-(1j * omega + gamma) * tau)
            core = lorentzian_kernel(spec, omega, omega_prime) * left * right
            occupation = np.asarray(spec.n2(omega_prime))
            return np.stack([core * occupation, np.conj(core) * (occupation + 1.0)], axis=-1)

        value = value + _rii_integral(
            spec, quad_cfg, t + tau, rii_factor, breakpoints=(), label="RII correlation term"
        )

    return complex(value[0]), complex(value[1])


def alpha_plus(spec: CompositeEnvSpec, t: float, t_prime: float,
               quad_cfg: QuadConfig = QuadConfig()) -> complex:
    """Correlation <B^dagger(t) B(t - t_prime)> of the RI coupling operator."""
    return correlation_pair(spec, t, t_prime, quad_cfg)[0]


def alpha_minus(spec: CompositeEnvSpec, t: float, t_prime: float,
                quad_cfg: QuadConfig = QuadConfig()) -> complex:
    """Correlation <B(t) B^dagger(t - t_prime)> of the RI coupling operator."""
    return correlation_pair(spec, t, t_prime, quad_cfg)[1]


# ---------------------------------------------------------------------------
# Decay rates from quadrature
# ---------------------------------------------------------------------------

def _ri_rate_term(spec: CompositeEnvSpec, omega0: float, t: float,
                  quad_cfg: QuadConfig) -> np.ndarray:
    """Short time part of P(t) for occupations n_I and n_I + 1."""
    def integrand(omega: np.ndarray) -> np.ndarray:
        gamma = 0.5 * np.asarray(spec.j2(omega))
        window = np.asarray(spec.j1(omega)) * damped_window(omega - omega0, gamma, t)
        occupation = np.asarray(spec.n1(omega))
        return np.stack([window * occupation, window * (occupation + 1.0)], axis=-1) / TWO_PI

    value, _ = integrate_frequency(
        integrand,
        quad_cfg.omega_max(spec),
        quad_cfg.abs_tol,
        quad_cfg.rel_tol,
        quad_cfg.max_panels,
        oscillation=t,
        breakpoints=(omega0,),
        exponent=spec.r1.spectral.s,
        label=f"short time rate term at t={t:.6g}",
    )
    return value


def _rii_rate_term_exact(spec: CompositeEnvSpec, omega0: float, t: float,
                         quad_cfg: QuadConfig) -> np.ndarray:
    """Long time part of P(t): the full two-frequency integral."""
    phase = np.exp(-1j * omega0 * t)

    def rii_factor(omega: float, omega_prime: np.ndarray) -> np.ndarray:
        gamma = 0.5 * spec.j2(omega)
        left = np.exp(1j * omega_prime * t) - np.exp((1j * omega - gamma) * t)
        right = phase * (
            exp_window(1j * (omega0 - omega_prime), t)
            - exp_window(1j * (omega0 - omega) - gamma, t)
        )
        core = lorentzian_kernel(spec, omega, omega_prime) * left * right
        occupation = np.asarray(spec.n2(omega_prime))
        return np.stack([core * occupation, core * (occupation + 1.0)], axis=-1)

    return _rii_integral(
        spec, quad_cfg, t, rii_factor, breakpoints=(omega0,),
        label=f"long time rate term at t={t:.6g}",
    )


def _rii_rate_term_resonant(spec: CompositeEnvSpec, omega0: float, t: float,
                            quad_cfg: QuadConfig) -> np.ndarray:
    """Long time part of P(t) with RII flat across each RI resonance."""
    def integrand(omega: np.ndarray) -> np.ndarray:
        gamma = 0.5 * np.asarray(spec.j2(omega))
        delta = omega - omega0
        window = exp_window(1j * delta - gamma, t) - damped_window(delta, gamma, t)
        window = window * np.asarray(spec.j1(omega))
        occupation = np.asarray(spec.n2(omega))
        return np.stack([window * occupation, window * (occupation + 1.0)], axis=-1) / TWO_PI

    value, _ = integrate_frequency(
        integrand,
        quad_cfg.omega_max(spec),
        quad_cfg.abs_tol,
        quad_cfg.rel_tol,
        quad_cfg.max_panels,
        oscillation=t,
        breakpoints=(omega0,),
        exponent=spec.r1.spectral.s,
        label=f"resonant long time rate term at t={t:.6g}",
    )
    return value


_LONG_TIME_TERMS = {
    'exact': _rii_rate_term_exact,
    'resonant': _rii_rate_term_resonant,
}


def _rate_point(spec: CompositeEnvSpec, omega0: float, quad_cfg: QuadConfig,
                model: str, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """P-type integrals at one time: (short time part, long time part), each for n and n+1."""
    if t == 0:
        zero = np.zeros(2, dtype=complex)
        return zero, zero
    short = _ri_rate_term(spec, omega0, t, quad_cfg)
    if spec.r2.spectral.g == 0:
        return short, np.zeros(2, dtype=complex)
    return short, _LONG_TIME_TERMS[model](spec, omega0, t, quad_cfg)


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing and start at t >= 0")
    return times


def _quadrature_rates(
    spec: CompositeEnvSpec,
    sys: SystemSpec,
    t_grid: Sequence[float],
    quad_cfg: QuadConfig,
    model: str,
    threads: int,
) -> RateTrace:
    times = _check_grid(t_grid)
    worker = partial(_rate_point, spec, sys.omega0, quad_cfg, model)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(worker, times))

    short = np.array([p[0] for p in parts])
    long = np.array([p[1] for p in parts])
    total = short + long
    # M(t) is the conjugate of the n+1 column
    return RateTrace(
        times=times,
        gamma_plus=2.0 * total[:, 0].real,
        gamma_minus=2.0 * total[:, 1].real,
        delta_omega=-total[:, 0].imag - total[:, 1].imag,
        gamma_plus_lt=2.0 * long[:, 0].real,
        gamma_minus_lt=2.0 * long[:, 1].real,
        source=model,
    )


def decay_rates_exact(
    spec: CompositeEnvSpec,
    sys: SystemSpec,
    t_grid: Sequence[float],
    quad_cfg: QuadConfig = QuadConfig(),
    threads: int = 1,
) -> RateTrace:
    """
    Canonical decay rates and Lamb shift by frequency quadrature.

    gamma_plus = 2 Re P(t), gamma_minus = 2 Re M(t) and
    delta_omega = -Im P(t) + Im M(t), with the t' integrals of P and M done
    in closed form per frequency node. Time points are independent and are
    evaluated on a thread pool; the trace keeps the input order.
    """
    return _quadrature_rates(spec, sys, t_grid, quad_cfg, 'exact', threads)


def decay_rates_resonant(
    spec: CompositeEnvSpec,
    sys: SystemSpec,
    t_grid: Sequence[float],
    quad_cfg: QuadConfig = QuadConfig(),
    threads: int = 1,
) -> RateTrace:
    """
    Decay rates with RII treated as flat around every RI mode.

    The RII kernel then acts as 2 pi delta(omega - omega') on the full mode
    correlation, leaving one-dimensional quadratures that keep the short
    time oscillations the closed-form rates miss.
    """
    return _quadrature_rates(spec, sys, t_grid, quad_cfg, 'resonant', threads)


def lamb_shift(
    spec: CompositeEnvSpec,
    sys: SystemSpec,
    t_grid: Sequence[float],
    quad_cfg: QuadConfig = QuadConfig(),
    threads: int = 1,
) -> np.ndarray:
    """Environment-induced shift delta_omega(t) of the level splitting."""
    return decay_rates_exact(spec, sys, t_grid, quad_cfg, threads).delta_omega


# ---------------------------------------------------------------------------
# Closed-form short time / long time rates
# ---------------------------------------------------------------------------

def approx_rate_components(spec: CompositeEnvSpec, sys: SystemSpec,
                           t: Union[float, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    Short time (RI) and long time (RII) parts of the closed-form rates.

    Returns:
        Dict with keys plus_st, plus_lt, minus_st, minus_lt
    """
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("rates are defined for t >= 0")
    j1, j2, n1, n2 = spec.at(sys.omega0)
    remaining = np.exp(-j2 * times)
    reached = -np.expm1(-j2 * times)
    return {
        'plus_st': j1 * n1 * remaining,
        'plus_lt': j1 * n2 * reached,
        'minus_st': j1 * (n1 + 1.0) * remaining,
        'minus_lt': j1 * (n2 + 1.0) * reached,
    }


def decay_rates_approx(spec: CompositeEnvSpec, sys: SystemSpec,
                       t: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form rates gamma_pm(t) = gamma_pm^ST(t) + gamma_pm^LT(t).

    gamma_plus = J_I [n_I exp(-J_II t) + n_II (1 - exp(-J_II t))], gamma_minus
    the same with n -> n + 1, all evaluated at omega0.
    """
    parts = approx_rate_components(spec, sys, t)
    plus = parts['plus_st'] + parts['plus_lt']
    minus = parts['minus_st'] + parts['minus_lt']
    if np.ndim(t) == 0:
        return float(plus), float(minus)
    return plus, minus


def approx_rate_trace(spec: CompositeEnvSpec, sys: SystemSpec,
                      t_grid: Sequence[float]) -> RateTrace:
    times = _check_grid(t_grid)
    parts = approx_rate_components(spec, sys, times)
    return RateTrace(
        times=times,
        gamma_plus=parts['plus_st'] + parts['plus_lt'],
        gamma_minus=parts['minus_st'] + parts['minus_lt'],
        delta_omega=np.zeros_like(times),
        gamma_plus_lt=parts['plus_lt'],
        gamma_minus_lt=parts['minus_lt'],
        source='approx',
    )


def approx_rate_function(spec: CompositeEnvSpec, sys: SystemSpec) -> RateFunction:
    """Closed-form rates as a t -> (gamma_plus, gamma_minus, 0) closure for the integrators."""
    j1, j2, n1, n2 = spec.at(sys.omega0)

    def rates(t: float) -> Tuple[float, float, float]:
        reached = -np.expm1(-j2 * t)
        n_eff = n1 + (n2 - n1) * reached
        return j1 * n_eff, j1 * (n_eff + 1.0), 0.0

    return rates
