"""
Prethermal - Environment Model
Spectral densities, Bose occupations and the parameter types describing a
two-level system coupled to a reservoir RI that is itself driven by RII.
"""

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from src.errors import DomainError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class SpectralParams:
    """
    Caldeira-Leggett spectral density parameters.

    Args:
        g: Dimensionless coupling strength (>= 0)
        s: Ohmicity exponent (> 0, 1 is Ohmic)
        omega_c: Cutoff frequency in units of omega0 (> 0)
    """
    g: float
    s: float = 1.0
    omega_c: float = 10.0

    def __post_init__(self):
        if not np.isfinite(self.g) or self.g < 0:
            raise DomainError(f"coupling g must be >= 0, got {self.g}")
        if not np.isfinite(self.s) or self.s <= 0:
            raise DomainError(f"ohmicity s must be > 0, got {self.s}")
        if not np.isfinite(self.omega_c) or self.omega_c <= 0:
            raise DomainError(f"cutoff omega_c must be > 0, got {self.omega_c}")


@dataclass(frozen=True)
class BathSpec:
    """A thermal bosonic bath: spectral density plus inverse temperature."""
    spectral: SpectralParams
    beta: float

    def __post_init__(self):
        # infinite temperature and pure ground-state baths are both rejected
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise DomainError(f"inverse temperature beta must be finite and > 0, got {self.beta}")


class ResonantValues(NamedTuple):
    """Spectral densities and occupations of both reservoirs at one frequency."""
    j1: float
    j2: float
    n1: float
    n2: float


@dataclass(frozen=True)
class CompositeEnvSpec:
    """
    Hierarchical environment: RI couples to the system, RII damps every RI mode.

    Args:
        r1: Directly coupled reservoir RI
        r2: Driving reservoir RII
    """
    r1: BathSpec
    r2: BathSpec

    def j1(self, omega: ArrayLike) -> ArrayLike:
        return spectral_density(self.r1.spectral, omega)

    def j2(self, omega: ArrayLike) -> ArrayLike:
        return spectral_density(self.r2.spectral, omega)

    def n1(self, omega: ArrayLike) -> ArrayLike:
        return bose_occupation(self.r1.beta, omega)

    def n2(self, omega: ArrayLike) -> ArrayLike:
        return bose_occupation(self.r2.beta, omega)

    def at(self, omega0: float) -> ResonantValues:
        """Resonant values (J_I, J_II, n_I, n_II) at the system frequency."""
        return ResonantValues(
            float(self.j1(omega0)),
            float(self.j2(omega0)),
            float(self.n1(omega0)),
            float(self.n2(omega0)),
        )

    def max_cutoff(self) -> float:
        return max(self.r1.spectral.omega_c, self.r2.spectral.omega_c)


@dataclass(frozen=True)
class SystemSpec:
    """Two-level system with Hamiltonian omega0 * sigma_z / 2."""
    omega0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.omega0) or self.omega0 <= 0:
            raise DomainError(f"level splitting omega0 must be > 0, got {self.omega0}")


def spectral_density(p: SpectralParams, omega: ArrayLike) -> ArrayLike:
    """
    Evaluate J(omega) = g * omega_c**(1-s) * omega**s * exp(-omega/omega_c).

    Args:
        p: Spectral parameters
        omega: Frequency or array of frequencies (>= 0)

    Returns:
        Spectral density, same shape as omega
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("spectral density is defined for omega >= 0 only")
    value = p.g * p.omega_c ** (1.0 - p.s) * w ** p.s * np.exp(-w / p.omega_c)
    return value if value.ndim else float(value)


def bose_occupation(beta: float, omega: ArrayLike) -> ArrayLike:
    """
    Mean thermal number of quanta 1 / (exp(beta * omega) - 1).

    The omega -> 0 divergence is left to the quadrature weights, so omega
    must be strictly positive here.
    """
    if not beta > 0:
        raise DomainError(f"inverse temperature must be > 0, got {beta}")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("Bose occupation needs omega > 0")
    value = 1.0 / np.expm1(beta * w)
    return value if value.ndim else float(value)


def thermal_population(beta: float, omega0: float) -> float:
    """Upper-level population of the thermal state, 1 / (1 + exp(beta * omega0))."""
    return float(0.5 * (1.0 - np.tanh(0.5 * beta * omega0)))


def thermal_polarization(beta: float, omega0: float) -> float:
    """z component of the thermal Bloch vector, -tanh(beta * omega0 / 2)."""
    return float(-np.tanh(0.5 * beta * omega0))


def composite_env(
    g_I: float,
    g_II: float,
    beta_I: float,
    beta_II: float,
    s: float = 1.0,
    omega_c: float = 10.0,
) -> CompositeEnvSpec:
    """Shorthand for the common case of equal ohmicity and cutoff in both layers."""
    return CompositeEnvSpec(
        r1=BathSpec(SpectralParams(g_I, s, omega_c), beta_I),
        r2=BathSpec(SpectralParams(g_II, s, omega_c), beta_II),
    )
