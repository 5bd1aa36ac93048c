"""Analytic phases and decoherence factors for the dephased dressed doublet.

For a universe prepared in |pm(n)> x (bath vacuum) and carried once around the
phase-shift loop in time T, the geometric phase splits into

    berry_part          gamma(n) = (2n + 1) pi
    env_dynamical_part  sum_j omega_j T x_j^2
    env_arg_part        -sum_j x_j^2 sin(omega_j T)

with x_j = Lambda_j / omega_j. Both environment terms carry the common factor
(n + 1); it is factored out before multiplication so the scaling with n holds
bit-for-bit.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .model import (
    BathMode,
    Branch,
    OhmicSpectrum,
    SystemParams,
    bath_arrays,
    berry_phase_half_turns,
    dressed_energies,
)

SERIES_RTOL = 1e-16
SERIES_CHECK_XMAX = 2.0
SERIES_CHECK_ATOL = 1e-12
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class PhaseResult:
    total: float
    berry_part: float
    env_dynamical_part: float
    env_arg_part: float

    @classmethod
    def from_parts(cls, berry: float, dynamical: float, arg: float) -> "PhaseResult":
        return cls(berry + dynamical + arg, berry, dynamical, arg)

    @property
    def environment_part(self) -> float:
        return self.env_dynamical_part + self.env_arg_part


@dataclass(frozen=True)
class DecoherenceFactor:
    """F(t) = exp(-i (E+ - E-) t) exp(-sum_j eta_j(t))."""

    value: complex
    exponent_sum: float
    dynamical_angle: float

    @property
    def magnitude(self) -> float:
        return math.exp(-self.exponent_sum)

    @property
    def phase(self) -> float:
        """Unwrapped argument of F; the bath factor is real and positive."""
        return -self.dynamical_angle


def berry_phase(n: int, branch: Branch | str = Branch.PLUS) -> float:
    """gamma_pm(n) = (2n + 1) pi, identical for both branches."""
    Branch.parse(branch)
    if n < 0:
        raise DomainError(f"photon index must be non-negative, got {n}")
    return berry_phase_half_turns(n) * math.pi


def poisson_mean_occupation(x) -> np.ndarray:
    """exp(-x^2) sum_{m>=0} m x^{2m} / m!, summed term by term.

    The sum stops once the next term falls below ``SERIES_RTOL`` relative to the
    running total (terms decay factorially past m ~ x^2). Analytically equal to x^2.
    """
    x = np.asarray(x, dtype=float)
    x2 = x * x
    weight = np.exp(-x2)  # Poisson weight of m = 0
    total = np.zeros_like(x2)
    m = 0
    while True:
        m += 1
        weight = weight * x2 / m
        term = m * weight
        total = total + term
        if m > x2.max(initial=0.0) and np.all(term <= SERIES_RTOL * np.maximum(total, np.finfo(float).tiny)):
            break
        if m > 10_000:
            raise ArithmeticError("Poisson series failed to converge")
    return total


def printed_dynamical_term(params: SystemParams, bath: Sequence[BathMode], T: float) -> float:
    """sum_j omega_j T exp(-x_j^2) sum_m m x_j^{2m}/m!, evaluated literally."""
    freqs, lams = bath_arrays(bath)
    x = lams * math.sqrt(params.n + 1) / freqs
    return float(np.sum(freqs * T * poisson_mean_occupation(x)))


def printed_overlap_phase(params: SystemParams, bath: Sequence[BathMode], T: float) -> float:
    """arg prod_j exp(-x_j^2 (1 - exp(-i omega_j T))), principal value."""
    freqs, lams = bath_arrays(bath)
    x2 = (lams * math.sqrt(params.n + 1) / freqs) ** 2
    factor = np.prod(np.exp(-x2 * (1.0 - np.exp(-1j * freqs * T))))
    return cmath.phase(complex(factor))


def _environment_terms(bath: Sequence[BathMode], n: int, T: float) -> tuple[float, float]:
    freqs, lams = bath_arrays(bath)
    base = (lams / freqs) ** 2
    scale = n + 1
    dynamical = scale * float(np.sum(base * freqs * T))
    arg = scale * -float(np.sum(base * np.sin(freqs * T)))
    # The printed series form of the dynamical term must reproduce x^2 wherever it is well conditioned.
    x2 = scale * base
    checked = x2 <= SERIES_CHECK_XMAX**2
    if np.any(checked):
        series = poisson_mean_occupation(np.sqrt(x2[checked]))
        worst = float(np.max(np.abs(series - x2[checked])))
        if worst > SERIES_CHECK_ATOL:
            raise ArithmeticError(f"Poisson series disagrees with x^2 by {worst:.3e}")
    return dynamical, arg


def pure_phase_discrete(
    params: SystemParams,
    bath: Sequence[BathMode],
    branch: Branch | str,
    T: float,
) -> PhaseResult:
    """Geometric phase of the universe for a discrete bath; both branches share the bath terms."""
    if not T >= 0:
        raise DomainError(f"duration T must be non-negative, got {T}")
    berry = berry_phase(params.n, branch)
    dynamical, arg = _environment_terms(bath, params.n, T)
    return PhaseResult.from_parts(berry, dynamical, arg)


def pure_phase_ohmic(
    params: SystemParams,
    spectrum: OhmicSpectrum,
    branch: Branch | str,
    T: float,
) -> PhaseResult:
    """Continuum version: gamma + eps wc^2 (n+1) T / 2 + eps (n+1) (cos(wc T) - 1) / T."""
    if not T > 0:
        raise DomainError(f"Ohmic phase needs T > 0 (1/T term is singular), got {T}")
    berry = berry_phase(params.n, branch)
    eps, wc = spectrum.epsilon, spectrum.omega_c
    scale = params.n + 1
    dynamical = scale * (eps * wc**2 * T / 2.0)
    arg = scale * (eps * (math.cos(wc * T) - 1.0) / T)
    return PhaseResult.from_parts(berry, dynamical, arg)


def pure_phase_weak(params: SystemParams, bath: Sequence[BathMode], T: float) -> PhaseResult:
    """Weak-coupling form: gamma_+(n) + sum_j omega_j T x_j^2.

    The -sum_j x_j^2 sin(omega_j T) term is dropped even though it is of the
    same order; ``pure_phase_discrete(...).total - pure_phase_weak(...).total``
    equals exactly that term.
    """
    if not T >= 0:
        raise DomainError(f"duration T must be non-negative, got {T}")
    berry = berry_phase(params.n, Branch.PLUS)
    dynamical, _ = _environment_terms(bath, params.n, T)
    return PhaseResult.from_parts(berry, dynamical, 0.0)


def decoherence_exponents(params: SystemParams, bath: Sequence[BathMode], times) -> np.ndarray:
    """eta_j(t) = 4 x_j^2 (1 - cos omega_j t), shape (len(times), len(bath))."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    freqs, lams = bath_arrays(bath)
    x2 = (params.n + 1) * (lams / freqs) ** 2
    # 1 - cos(a) = 2 sin^2(a/2) avoids cancellation at small a
    return 8.0 * x2 * np.sin(0.5 * np.outer(times, freqs)) ** 2


def decoherence_series(params: SystemParams, bath: Sequence[BathMode], times) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised F(t) over a time grid; returns (F, sum_j eta_j)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise DomainError("times must be non-negative")
    e_plus, e_minus = dressed_energies(params)
    eta = decoherence_exponents(params, bath, times).sum(axis=1)
    values = np.exp(-1j * (e_plus - e_minus) * times) * np.exp(-eta)
    return values, eta


def decoherence_factor(params: SystemParams, bath: Sequence[BathMode], t: float) -> DecoherenceFactor:
    if not t >= 0:
        raise DomainError(f"time must be non-negative, got {t}")
    values, eta = decoherence_series(params, bath, [t])
    e_plus, e_minus = dressed_energies(params)
    return DecoherenceFactor(complex(values[0]), float(eta[0]), (e_plus - e_minus) * t)


def check_normalized(c_plus: complex, c_minus: complex, tol: float = NORMALIZATION_TOL) -> None:
    norm = abs(c_plus) ** 2 + abs(c_minus) ** 2
    if not abs(norm - 1.0) <= tol:
        raise DomainError(f"amplitudes not normalized: |c+|^2 + |c-|^2 = {norm!r}")


def pointer_limit_phase(c_plus: complex, c_minus: complex, n: int) -> float:
    """arg(|c+|^2 e^{-i gamma+} + |c-|^2 e^{-i gamma-}) in (-pi, pi].

    gamma_pm = (2n+1) pi are odd multiples of pi, so each phase factor is exactly -1.
    """
    check_normalized(c_plus, c_minus)
    if n < 0:
        raise DomainError(f"photon index must be non-negative, got {n}")
    factor = -1.0 if berry_phase_half_turns(n) % 2 else 1.0
    re = (abs(c_plus) ** 2 + abs(c_minus) ** 2) * factor
    return math.atan2(0.0, re)
