"""
Prethermal - Finite-Mode Oracle
Exact correlations of a discretized hierarchical bath. Every RI mode and its
private RII sub-bath form a quadratic one-particle block that is diagonalized
once; the correlations then follow from the block propagators.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import eigh

from src.environment.env_model import BathSpec, CompositeEnvSpec, bose_occupation
from src.errors import DomainError
from src.rates.correlations import correlation_pair
from src.rates.quadrature import QuadConfig

# Fraction of the recurrence time 2 pi / d_omega that is trusted
RECURRENCE_FRACTION = 0.8


@dataclass(frozen=True)
class FiniteBath:
    """
    Uniform midpoint discretization of both reservoirs.

    |g_I|^2 = J_I(omega) d_omega_I / (2 pi) and |g_II|^2 = J_II(omega) d_omega_II / (2 pi);
    each RI mode couples to its own copy of the RII grid.
    """
    spec: CompositeEnvSpec
    omega_I: np.ndarray
    g_I: np.ndarray
    omega_II: np.ndarray
    g_II: np.ndarray
    d_omega_I: float
    d_omega_II: float
    omega_max: float

    @property
    def n_modes(self) -> int:
        return int(self.omega_I.size)

    @property
    def n_sub_modes(self) -> int:
        return int(self.omega_II.size)

    def recurrence_time(self) -> float:
        """Largest time before the discrete spectrum revives, with a safety margin."""
        spacing = max(self.d_omega_I, self.d_omega_II)
        return RECURRENCE_FRACTION * 2.0 * np.pi / spacing

    def check_times(self, times: Iterable[float], force: bool = False):
        latest = max((float(t) for t in times), default=0.0)
        if latest > self.recurrence_time() and not force:
            raise DomainError(
                f"t={latest:.6g} exceeds the recurrence guard {self.recurrence_time():.6g} "
                f"of this discretization; refine the grid or pass force=True"
            )


@dataclass(frozen=True)
class OneParticleBlock:
    """Single-particle Hamiltonian of one RI mode (index 0) and its sub-bath."""
    h: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def build(cls, omega: float, omega_sub: np.ndarray, g_sub: np.ndarray) -> "OneParticleBlock":
        size = omega_sub.size + 1
        h = np.zeros((size, size))
        h[0, 0] = omega
        h[0, 1:] = g_sub
        h[1:, 0] = g_sub
        h[1:, 1:] = np.diag(omega_sub)
        energies, vectors = eigh(h)
        return cls(h, energies, vectors)

    def propagator(self, t: float) -> np.ndarray:
        """U(t) = exp(-i h t)."""
        phases = np.exp(-1j * self.energies * t)
        return (self.vectors * phases) @ self.vectors.T

    def amplitudes(self, times: Sequence[float]) -> np.ndarray:
        """Rows U(t)_{0j} for every t, shape (T, M + 1)."""
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.energies))
        return (phases * self.vectors[0]) @ self.vectors.T


class WignerWeisskopfReport(NamedTuple):
    lambda_index: int
    omega: float
    decay_rate: float
    max_deviation: float
    times: np.ndarray
    deviations: np.ndarray


def _midpoints(omega_max: float, count: int) -> Tuple[np.ndarray, float]:
    step = omega_max / count
    return (np.arange(count) + 0.5) * step, step


def discretize(spec: CompositeEnvSpec, N: int, M: int, omega_max: float) -> FiniteBath:
    """
    Discretize RI into N modes and every sub-bath into M modes on (0, omega_max].

    Args:
        spec: Composite environment
        N: RI modes (>= 1)
        M: Sub-bath modes per RI mode (>= 0)
        omega_max: Upper frequency

    Returns:
        FiniteBath
    """
    if N < 1 or M < 0:
        raise DomainError(f"need N >= 1 and M >= 0, got N={N}, M={M}")
    if omega_max <= 0:
        raise DomainError(f"omega_max must be > 0, got {omega_max}")
    omega_I, d_omega_I = _midpoints(omega_max, N)
    g_I = np.sqrt(np.asarray(spec.j1(omega_I)) * d_omega_I / (2.0 * np.pi))
    if M:
        omega_II, d_omega_II = _midpoints(omega_max, M)
        g_II = np.sqrt(np.asarray(spec.j2(omega_II)) * d_omega_II / (2.0 * np.pi))
    else:
        omega_II, d_omega_II, g_II = np.zeros(0), 0.0, np.zeros(0)
    return FiniteBath(spec, omega_I, g_I, omega_II, g_II, d_omega_I, d_omega_II, float(omega_max))


def _block_contribution(
    bath: FiniteBath,
    betas: Tuple[float, float],
    times: np.ndarray,
    index: int,
) -> Tuple[np.ndarray, np.ndarray]:
    block = OneParticleBlock.build(bath.omega_I[index], bath.omega_II, bath.g_II)
    rows = block.amplitudes(times)
    occupation = np.concatenate([
        [bose_occupation(betas[0], bath.omega_I[index])],
        np.asarray(bose_occupation(betas[1], bath.omega_II)) if bath.n_sub_modes else np.zeros(0),
    ])
    weight = bath.g_I[index] ** 2
    plus = weight * (np.conj(rows) * occupation) @ rows.T
    minus = weight * (rows * (occupation + 1.0)) @ np.conj(rows).T
    return plus, minus


def alpha_grid(
    bath: FiniteBath,
    betas: Optional[Tuple[float, float]] = None,
    times: Sequence[float] = (0.0,),
    threads: int = 1,
    force: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both correlation matrices on a time grid.

    Returns:
        Tuple (A_plus, A_minus) with A_plus[a, b] = alpha_plus(times[a], times[b])
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0):
        raise DomainError("oracle times must be a 1-D array of t >= 0")
    bath.check_times(times, force)
    betas = betas or (bath.spec.r1.beta, bath.spec.r2.beta)

    plus = np.zeros((times.size, times.size), dtype=complex)
    minus = np.zeros_like(plus)
    worker = partial(_block_contribution, bath, betas, times)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        # map yields in lambda order, so the sum is reproducible
        for block_plus, block_minus in pool.map(worker, range(bath.n_modes)):
            plus += block_plus
            minus += block_minus
    return plus, minus


def alpha_exact_finite(
    bath: FiniteBath,
    betas: Optional[Tuple[float, float]] = None,
    t: float = 0.0,
    tau: float = 0.0,
    threads: int = 1,
    force: bool = False,
) -> Tuple[complex, complex]:
    """
    alpha_plus(t, tau) = sum_lambda |g_lambda|^2 sum_j conj(U(t)_0j) U(tau)_0j n_j,
    and alpha_minus with n_j + 1 and the conjugation swapped.
    """
    plus, minus = alpha_grid(bath, betas, [t, tau], threads, force)
    return complex(plus[0, 1]), complex(minus[0, 1])


def validate_wigner_weisskopf(
    bath: FiniteBath,
    lambda_index: int,
    t_grid: Sequence[float],
    force: bool = False,
) -> WignerWeisskopfReport:
    """Compare U_00(t) of one block with exp(-(i omega + J_II(omega) / 2) t)."""
    if not 0 <= lambda_index < bath.n_modes:
        raise DomainError(f"mode index {lambda_index} outside [0, {bath.n_modes})")
    times = np.asarray(t_grid, dtype=float)
    bath.check_times(times, force)
    omega = float(bath.omega_I[lambda_index])
    rate = 0.5 * float(bath.spec.j2(omega))
    block = OneParticleBlock.build(omega, bath.omega_II, bath.g_II)
    survival = block.amplitudes(times)[:, 0]
    deviations = np.abs(survival - np.exp(-(1j * omega + rate) * times))
    return WignerWeisskopfReport(lambda_index, omega, rate, float(deviations.max(initial=0.0)),
                                 times, deviations)


def compare_with_quadrature(
    bath: FiniteBath,
    betas: Optional[Tuple[float, float]] = None,
    pairs: Sequence[Tuple[float, float]] = (),
    quad_cfg: QuadConfig = QuadConfig(),
    threads: int = 1,
    force: bool = False,
) -> Tuple[pd.DataFrame, float]:
    """
    Oracle against frequency quadrature on (t, tau) pairs.

    The quadrature runs on the same frequency window as the discretization.
    Pairs with tau > t are served through alpha(t, tau) = conj alpha(tau, t).

    Returns:
        Tuple of (comparison table, norm-relative error over all entries)
    """
    spec = bath.spec
    if betas is not None:
        spec = CompositeEnvSpec(
            r1=BathSpec(spec.r1.spectral, betas[0]),
            r2=BathSpec(spec.r2.spectral, betas[1]),
        )
    cfg = replace(quad_cfg, omega_max_factor=bath.omega_max / spec.max_cutoff())
    rows = []
    for t, tau in pairs:
        oracle_plus, oracle_minus = alpha_exact_finite(bath, betas, t, tau, threads, force)
        late, early = max(t, tau), min(t, tau)
        quad_plus, quad_minus = correlation_pair(spec, late, late - early, cfg)
        if tau > t:
            quad_plus, quad_minus = np.conj(quad_plus), np.conj(quad_minus)
        rows.append({
            't': t,
            'tau': tau,
            'alpha_plus_re_quad': quad_plus.real,
            'alpha_plus_im_quad': quad_plus.imag,
            'alpha_plus_re_oracle': oracle_plus.real,
            'alpha_plus_im_oracle': oracle_plus.imag,
            'alpha_minus_re_quad': quad_minus.real,
            'alpha_minus_im_quad': quad_minus.imag,
            'alpha_minus_re_oracle': oracle_minus.real,
            'alpha_minus_im_oracle': oracle_minus.imag,
            'abs_error': max(abs(quad_plus - oracle_plus), abs(quad_minus - oracle_minus)),
        })
    table = pd.DataFrame(rows)
    if table.empty:
        return table, 0.0
    quad = table[['alpha_plus_re_quad', 'alpha_plus_im_quad',
                  'alpha_minus_re_quad', 'alpha_minus_im_quad']].to_numpy()
    oracle = table[['alpha_plus_re_oracle', 'alpha_plus_im_oracle',
                    'alpha_minus_re_oracle', 'alpha_minus_im_oracle']].to_numpy()
    scale = np.linalg.norm(quad)
    error = float(np.linalg.norm(oracle - quad) / scale) if scale > 0 else float(np.linalg.norm(oracle))
    return table, error


def sum_rule(bath: FiniteBath) -> Dict[str, float]:
    """alpha_minus(0, 0) - alpha_plus(0, 0) against sum_lambda |g_lambda|^2."""
    plus, minus = alpha_grid(bath, times=[0.0])
    return {
        'commutator': float((minus[0, 0] - plus[0, 0]).real),
        'coupling_weight': float(np.sum(bath.g_I ** 2)),
    }
