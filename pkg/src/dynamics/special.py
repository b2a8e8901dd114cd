"""
Prethermal - Special Functions
Saturating exponentials and upper incomplete gamma functions with negative
parameter, as they appear in the closed-form center of the accessible ball.
"""

from typing import Callable, Union

import numpy as np
from scipy.integrate import quad

from src.errors import DomainError, QuadratureError

ArrayLike = Union[float, np.ndarray]

# Below this product the exponentials are replaced by their Taylor series
SERIES_CUTOFF = 1e-6
# Integrand magnitudes below exp(-LOG_FLOOR) (relative to the peak) are dropped
LOG_FLOOR = 60.0


def saturation(rate: ArrayLike, t: ArrayLike) -> ArrayLike:
    """(1 - exp(-rate * t)) / rate, equal to t for rate = 0."""
    rate = np.asarray(rate, dtype=float)
    t = np.asarray(t, dtype=float)
    x = rate * t
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, rate)
    value = np.where(small, t * (1.0 - 0.5 * x + x * x / 6.0), -np.expm1(-safe * t) / safe)
    return value if value.ndim else float(value)


def growth(rate: ArrayLike, s: ArrayLike) -> ArrayLike:
    """(exp(rate * s) - 1) / rate, equal to s for rate = 0."""
    rate = np.asarray(rate, dtype=float)
    s = np.asarray(s, dtype=float)
    x = rate * s
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, rate)
    value = np.where(small, s * (1.0 + 0.5 * x + x * x / 6.0), np.expm1(safe * s) / safe)
    return value if value.ndim else float(value)


def _log_space_integral(log_integrand: Callable[[float], float], scale: float,
                        upper: float = np.inf) -> float:
    """
    Integrate exp(log_integrand(v)) over [0, upper] on geometric panels.

    Panels start at width scale and double; integration stops at upper or
    once the integrand has fallen LOG_FLOOR e-folds below its running peak
    while decreasing.
    """
    if upper <= 0:
        return 0.0
    peak = log_integrand(0.0)
    total = 0.0
    left, width = 0.0, scale
    for _ in range(400):
        right = min(left + width, upper)
        peak_here = max(peak, log_integrand(right))

        def integrand(v, shift=peak_here):
            return np.exp(log_integrand(v) - shift)

        value, error = quad(integrand, left, right, epsabs=1e-14, epsrel=1e-12, limit=200)
        total = total * np.exp(peak - peak_here) + value
        if error > 1e-6 * max(abs(total), 1e-300):
            raise QuadratureError(f"incomplete gamma panel [{left:.4g}, {right:.4g}] did not converge", error)
        peak = peak_here
        tail = log_integrand(right)
        if right >= upper:
            break
        if tail < peak - LOG_FLOOR and tail < log_integrand(0.5 * (left + right)):
            break
        left, width = right, 2.0 * width
    return float(total * np.exp(peak))


def scaled_upper_gamma(b: float, z: float) -> float:
    """
    z**b * exp(z) * Gamma(-b, z) = int_0^inf (1 + v)**(-b-1) exp(-z v) dv.

    Finite for z > 0, and for z = 0 when b > 0 (where it equals 1 / b).
    """
    if z < 0:
        raise DomainError(f"scaled upper gamma needs z >= 0, got {z}")
    if z == 0:
        if b <= 0:
            raise DomainError("scaled upper gamma diverges for z = 0 and b <= 0")
        return 1.0 / b

    def log_integrand(v: float) -> float:
        return -(b + 1.0) * np.log1p(v) - z * v

    return _log_space_integral(log_integrand, 1.0 / max(b + 1.0 + z, 1e-12))


def upper_gamma_negative(b: float, x: float) -> float:
    """Upper incomplete gamma Gamma(-b, x) for x > 0 and any real b."""
    if x <= 0:
        raise DomainError(f"Gamma(-b, x) needs x > 0, got {x}")
    return float(np.exp(-b * np.log(x) - x) * scaled_upper_gamma(b, x))


def continued_gamma(b: float, a: float, upper: float) -> float:
    """
    int_0^upper (1 + v)**(-b-1) exp(-a v) dv for real a of either sign.

    For a > 0 and upper -> inf this is scaled_upper_gamma(b, a); with a < 0
    it is the analytic continuation of the incomplete gamma difference used
    when the RII occupation exceeds the RI one.
    """
    if upper < 0:
        raise DomainError(f"upper limit must be >= 0, got {upper}")

    def log_integrand(v: float) -> float:
        return -(b + 1.0) * np.log1p(v) - a * v

    return _log_space_integral(log_integrand, 1.0 / max(abs(b + 1.0) + abs(a), 1e-12), upper)
