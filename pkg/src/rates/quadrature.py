"""
Prethermal - Frequency Quadrature
Adaptive frequency integrals behind the correlation functions and rates.
One-dimensional integrals go through scipy's quad_vec; the inner integral of
the two-frequency RII term runs on vectorised Gauss-Legendre panels.
"""

from dataclasses import dataclass
from typing import Callable, Iterable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad_vec

from src.environment.env_model import CompositeEnvSpec
from src.errors import QuadratureError

# Embedded pair: the 24-point result is kept, the 12-point one only sizes the error
_COARSE_RULE = leggauss(12)
_FINE_RULE = leggauss(24)

# Initial panel width, in half turns of exp(i omega t)
ADAPTIVE_TURNS = 2.0
VECTORISED_TURNS = 1.0

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadConfig:
    """
    Frequency quadrature settings.

    Args:
        omega_max_factor: Domain is [0, omega_max_factor * max cutoff]
        abs_tol: Absolute tolerance per integral
        rel_tol: Relative tolerance per integral
        max_panels: Subdivisions allowed on top of the initial panels
    """
    omega_max_factor: float = 40.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-6
    max_panels: int = 200_000

    def omega_max(self, spec: CompositeEnvSpec) -> float:
        return self.omega_max_factor * spec.max_cutoff()

    def tighter(self, factor: float = 10.0) -> "QuadConfig":
        """Same settings with both tolerances divided by factor (for nested integrals)."""
        return QuadConfig(
            omega_max_factor=self.omega_max_factor,
            abs_tol=self.abs_tol / factor,
            rel_tol=self.rel_tol / factor,
            max_panels=self.max_panels,
        )


# ---------------------------------------------------------------------------
# Vectorised Gauss-Legendre panels
# ---------------------------------------------------------------------------

def _panel_sums(func: Integrand, left: np.ndarray, right: np.ndarray, rule) -> np.ndarray:
    nodes, weights = rule
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.asarray(func(x.ravel()))
    values = values.reshape(x.shape + values.shape[1:])
    sums = np.einsum('j,pj...->p...', weights, values)
    return sums * half.reshape((-1,) + (1,) * (sums.ndim - 1))


def _magnitude(values: np.ndarray) -> np.ndarray:
    """Largest absolute entry per panel (first axis)."""
    flat = np.abs(values).reshape(values.shape[0], -1)
    return flat.max(axis=1) if flat.shape[1] else np.zeros(values.shape[0])


def integrate_panels(
    func: Integrand,
    edges: Iterable[float],
    abs_tol: float,
    rel_tol: float,
    max_panels: int,
    label: str = "integral",
) -> Tuple[np.ndarray, float]:
    """
    Integrate func over the union of the panels defined by edges.

    func receives a 1-D array holding the nodes of every open panel at once
    and returns an array whose first axis matches it; trailing axes (and
    complex values) are integrated componentwise.

    Args:
        func: Vectorised integrand
        edges: Panel boundaries (sorted and de-duplicated here)
        abs_tol: Absolute tolerance on the max-norm of the result
        rel_tol: Relative tolerance on the max-norm of the result
        max_panels: Panel budget
        label: Name used in error messages

    Returns:
        Tuple of (integral, accumulated error estimate)
    """
    edges = np.unique(np.asarray(list(edges), dtype=float))
    if edges.size < 2:
        raise ValueError("need at least two distinct panel edges")
    left, right = edges[:-1], edges[1:]
    span = edges[-1] - edges[0]

    total = None
    total_error = 0.0
    used = left.size

    while True:
        coarse = _panel_sums(func, left, right, _COARSE_RULE)
        fine = _panel_sums(func, left, right, _FINE_RULE)
        error = _magnitude(fine - coarse)

        if total is None:
            total = np.zeros(fine.shape[1:], dtype=fine.dtype)
        estimate = total + fine.sum(axis=0)
        tolerance = max(abs_tol, rel_tol * float(np.max(np.abs(estimate), initial=0.0)))
        accepted = error <= tolerance * (right - left) / span

        total = total + fine[accepted].sum(axis=0)
        total_error += float(error[accepted].sum())
        if accepted.all():
            return total, total_error

        left, right = left[~accepted], right[~accepted]
        used += left.size
        if used > max_panels:
            raise QuadratureError(
                f"{label} did not converge within {max_panels} panels",
                total_error + float(error[~accepted].sum()),
            )
        mid = 0.5 * (left + right)
        left, right = np.concatenate([left, mid]), np.concatenate([mid, right])


# ---------------------------------------------------------------------------
# scipy quad_vec on split real / imaginary parts
# ---------------------------------------------------------------------------

def _adaptive(
    func: Integrand,
    edges: np.ndarray,
    abs_tol: float,
    rel_tol: float,
    max_panels: int,
    label: str,
) -> Tuple[np.ndarray, float]:
    """quad_vec over [edges[0], edges[-1]], starting from the panels in edges."""
    lower, upper = float(edges[0]), float(edges[-1])
    sample = np.asarray(func(np.array([0.5 * (lower + upper)])))[0]
    shape, is_complex = sample.shape, np.iscomplexobj(sample)

    def flat(x: float) -> np.ndarray:
        value = np.asarray(func(np.array([x])))[0]
        if is_complex:
            return np.concatenate([np.real(value).ravel(), np.imag(value).ravel()])
        return np.asarray(value, dtype=float).ravel()

    interior = edges[1:-1]
    # quad_vec stops subdividing once the panel count reaches limit
    value, error, info = quad_vec(
        flat, lower, upper,
        epsabs=abs_tol,
        epsrel=rel_tol,
        norm='max',
        limit=interior.size + 1 + max_panels,
        points=interior.tolist() if interior.size else None,
        full_output=True,
    )
    if not info.success:
        raise QuadratureError(f"{label}: {info.message.lower()}", float(error))

    value = np.asarray(value)
    if is_complex:
        half = value.size // 2
        value = value[:half] + 1j * value[half:]
    return value.reshape(shape), float(error)


# ---------------------------------------------------------------------------
# Frequency integrals on [0, omega_max]
# ---------------------------------------------------------------------------

def frequency_edges(
    omega_max: float,
    oscillation: float = 0.0,
    breakpoints: Iterable[float] = (),
    min_panels: int = 16,
    turns: float = VECTORISED_TURNS,
) -> np.ndarray:
    """
    Initial panel boundaries on [0, omega_max].

    Panels are no wider than turns * pi / oscillation, so a factor
    exp(i omega t) with t <= oscillation completes at most turns half turns
    inside one panel.
    """
    width = omega_max / min_panels
    if oscillation > 0:
        width = min(width, turns * np.pi / oscillation)
    count = int(np.ceil(omega_max / width))
    edges = np.linspace(0.0, omega_max, count + 1)
    extra = np.asarray([b for b in breakpoints if 0.0 < b < omega_max], dtype=float)
    return np.unique(np.concatenate([edges, extra]))


def integrate_frequency(
    func: Integrand,
    omega_max: float,
    abs_tol: float,
    rel_tol: float,
    max_panels: int,
    oscillation: float = 0.0,
    breakpoints: Iterable[float] = (),
    exponent: float = 1.0,
    label: str = "frequency integral",
    vectorised: bool = False,
) -> Tuple[np.ndarray, float]:
    """
    Integrate over omega in [0, omega_max] with oscillation-aware panels.

    For exponent < 1 the integrand is expected to behave like omega**(exponent-1)
    at the origin; the first panel is then mapped with omega = w1 * u**(1/exponent),
    which makes the transformed integrand regular. Breakpoints are panel edges, so
    none falls inside the mapped panel.

    Args:
        func: Integrand of a 1-D frequency array, first output axis matching it
        omega_max: Upper limit
        abs_tol: Absolute tolerance
        rel_tol: Relative tolerance
        max_panels: Subdivision budget
        oscillation: Largest time t of an exp(i omega t) factor in func
        breakpoints: Frequencies where func changes quickly
        exponent: Power of the spectral density at small omega
        label: Name used in error messages
        vectorised: Evaluate whole panels of nodes per call (fixed
            Gauss-Legendre pair) instead of one abscissa per call (quad_vec)

    Returns:
        Tuple of (integral, error estimate)
    """
    breakpoints = [float(b) for b in breakpoints]
    turns = VECTORISED_TURNS if vectorised else ADAPTIVE_TURNS
    edges = frequency_edges(omega_max, oscillation, breakpoints, turns=turns)

    def integrate(f: Integrand, panel_edges: np.ndarray) -> Tuple[np.ndarray, float]:
        if vectorised:
            return integrate_panels(f, panel_edges, abs_tol, rel_tol, max_panels, label)
        return _adaptive(f, panel_edges, abs_tol, rel_tol, max_panels, label)

    if exponent >= 1.0:
        return integrate(func, edges)

    head = edges[1]
    power = 1.0 / exponent

    def mapped(u: np.ndarray) -> np.ndarray:
        omega = head * u ** power
        values = np.asarray(func(omega))
        jacobian = head * power * u ** (power - 1.0)
        return values * jacobian.reshape((-1,) + (1,) * (values.ndim - 1))

    head_value, head_error = integrate(mapped, np.linspace(0.0, 1.0, 5))
    tail_value, tail_error = integrate(func, edges[1:])
    return head_value + tail_value, head_error + tail_error


# ---------------------------------------------------------------------------
# Time windows
# ---------------------------------------------------------------------------

def complex_expm1(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 for complex z, accurate when |z| is small."""
    x, y = np.real(z), np.imag(z)
    real = np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2
    return real + 1j * np.exp(x) * np.sin(y)


def exp_window(z: np.ndarray, t: float) -> np.ndarray:
    """
    E(z, t) = (exp(z t) - 1) / z, the integral of exp(z s) over s in [0, t].

    Stable for |z t| -> 0, where it tends to t.
    """
    zt = np.asarray(z, dtype=complex) * t
    tiny = np.abs(zt) < 1e-12
    safe = np.where(tiny, 1.0, zt)
    ratio = np.where(tiny, 1.0 + 0.5 * zt, complex_expm1(safe) / safe)
    return t * ratio


def damped_window(delta: np.ndarray, gamma: np.ndarray, t: float) -> np.ndarray:
    """
    exp(-2 gamma t) * E(i delta + gamma, t) without overflow for large gamma t.
    """
    z = 1j * np.asarray(delta, dtype=float) + np.asarray(gamma, dtype=float)
    gt = np.real(z) * t
    small = gt < 300.0
    safe_z = np.where(np.abs(z) > 0, z, 1.0)
    near = np.exp(-2.0 * np.where(small, gt, 0.0)) * exp_window(np.where(small, z, 0.0), t)
    far = (np.exp((1j * np.imag(z) - np.real(z)) * t) - np.exp(-2.0 * gt)) / safe_z
    return np.where(small, near, far)
