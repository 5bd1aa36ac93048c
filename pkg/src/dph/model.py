"""
Physical parameters and dressed-state algebra
=============================================

A two-level system resonantly coupled to a single quantized field mode
(frequency ``omega``, coupling ``g``) decomposes into independent doublets
labelled by the photon index ``n``::

    |+(n)> = (|g, n+1> + |e, n>) / sqrt(2)
    |-(n)> = (|g, n+1> - |e, n>) / sqrt(2)

    E_pm(n) = (2n + 1) omega / 2  pm  g sqrt(n + 1)

A bath of oscillators couples to the doublet through the branch-diagonal
operator sqrt(n+1) (|+><+| - |-><-|) sum_j lambda_j (b_j^dag + b_j), so the
effective coupling of mode j inside doublet n is Lambda_j = lambda_j sqrt(n+1).

Units: hbar = 1 everywhere, every energy and coupling is an angular frequency.
Energies are tracked in full; the constant bath shift -sum Lambda_j^2/omega_j is
a global offset and never enters a geometric phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError


class Branch(str, Enum):
    PLUS = "plus"
    MINUS = "minus"

    @property
    def sign(self) -> int:
        return 1 if self is Branch.PLUS else -1

    @classmethod
    def parse(cls, value: "Branch | str") -> "Branch":
        if isinstance(value, Branch):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown branch {value!r}; expected 'plus' or 'minus'") from None


@dataclass(frozen=True)
class SystemParams:
    """Qubit/field frequency ``omega``, coupling ``g`` and photon index ``n``."""

    omega: float
    g: float
    n: int

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise DomainError(f"omega must be positive and finite, got {self.omega}")
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise DomainError(f"g must be non-negative and finite, got {self.g}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 0:
            raise DomainError(f"photon index n must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def splitting(self) -> float:
        """Dressed splitting E+ - E- = 2 g sqrt(n+1)."""
        return 2.0 * self.g * math.sqrt(self.n + 1)


@dataclass(frozen=True)
class BathMode:
    frequency: float
    coupling: float

    def __post_init__(self):
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise DomainError(f"bath mode frequency must be positive, got {self.frequency}")
        if not math.isfinite(self.coupling):
            raise DomainError(f"bath mode coupling must be finite, got {self.coupling}")


@dataclass(frozen=True)
class OhmicSpectrum:
    """Ohmic continuum: only the product rho(w) lambda_w^2 = epsilon w^2 on [0, omega_c] is modelled."""

    epsilon: float
    omega_c: float

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        if not (self.omega_c > 0 and math.isfinite(self.omega_c)):
            raise DomainError(f"omega_c must be positive, got {self.omega_c}")


@dataclass(frozen=True)
class DressedState:
    branch: Branch
    n: int

    def amplitudes(self) -> np.ndarray:
        """Amplitudes over the ordered pair (|g, n+1>, |e, n>)."""
        return np.array([1.0, self.branch.sign], dtype=complex) / math.sqrt(2.0)


def bath_arrays(bath: Sequence[BathMode]) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and bare couplings as float arrays (empty bath gives empty arrays)."""
    freqs = np.fromiter((m.frequency for m in bath), dtype=float, count=len(bath))
    couplings = np.fromiter((m.coupling for m in bath), dtype=float, count=len(bath))
    return freqs, couplings


def make_bath(frequencies: Iterable[float], couplings: Iterable[float]) -> list[BathMode]:
    freqs = list(frequencies)
    lams = list(couplings)
    if len(freqs) != len(lams):
        raise DomainError(f"got {len(freqs)} frequencies but {len(lams)} couplings")
    return [BathMode(float(w), float(lam)) for w, lam in zip(freqs, lams)]


def dressed_energies(params: SystemParams) -> tuple[float, float]:
    """Return (E+, E-) for doublet ``params.n``."""
    centre = (2 * params.n + 1) * params.omega / 2.0
    half = params.g * math.sqrt(params.n + 1)
    return centre + half, centre - half


def effective_couplings(bath: Sequence[BathMode], n: int) -> np.ndarray:
    """Lambda_j = lambda_j sqrt(n+1), in bath order."""
    if n < 0:
        raise DomainError(f"photon index must be non-negative, got {n}")
    _, lams = bath_arrays(bath)
    return lams * math.sqrt(n + 1)


def discretize_ohmic(spectrum: OhmicSpectrum, num_modes: int) -> list[BathMode]:
    """Midpoint-rule discretisation of the Ohmic continuum.

    Mode j = 1..M sits at (j - 1/2) omega_c / M with lambda_j^2 = epsilon omega_j^2 omega_c / M,
    so ``sum_j lambda_j^2 f(omega_j)`` is the midpoint rule for
    ``epsilon * integral_0^omega_c w^2 f(w) dw``. Cell centres keep every frequency away
    from w = 0, where Lambda_j / omega_j would not be defined.
    """
    if isinstance(num_modes, bool) or int(num_modes) != num_modes or num_modes < 1:
        raise DomainError(f"num_modes must be a positive integer, got {num_modes}")
    num_modes = int(num_modes)
    width = spectrum.omega_c / num_modes
    freqs = (np.arange(num_modes) + 0.5) * width
    lams = np.sqrt(spectrum.epsilon * width) * freqs
    return [BathMode(float(w), float(lam)) for w, lam in zip(freqs, lams)]


def berry_phase_half_turns(n: int) -> int:
    """Berry phase of either dressed branch in units of pi: (2n + 1)."""
    return 2 * n + 1


def phase_shifted_dressed_state(n: int, branch: Branch | str, psi: float) -> np.ndarray:
    """U(psi)|pm(n)> with U(psi) = exp(-i psi a^dag a), over (|g, n+1>, |e, n>)."""
    branch = Branch.parse(branch)
    photons = np.array([n + 1, n], dtype=float)
    return np.exp(-1j * psi * photons) * DressedState(branch, n).amplitudes()


def adiabatic_berry_phase(n: int, branch: Branch | str = Branch.PLUS, num_points: int = 64) -> float:
    """Berry phase of the dressed state carried once around the phase-shift loop.

    The connection A(psi) = i <s(psi)| d/dpsi |s(psi)> is evaluated pointwise on
    the loop psi in [0, 2 pi), with the derivative supplied by the loop generator
    (d/dpsi U = -i a^dag a U), and integrated with the periodic trapezoid rule.
    The returned value is the unwrapped integral, not reduced mod 2 pi.
    """
    if n < 0:
        raise DomainError(f"photon index must be non-negative, got {n}")
    branch = Branch.parse(branch)
    photons = np.array([n + 1, n], dtype=float)
    psis = np.linspace(0.0, 2.0 * np.pi, num_points, endpoint=False)
    connection = np.empty(num_points)
    for k, psi in enumerate(psis):
        state = phase_shifted_dressed_state(n, branch, psi)
        dstate = -1j * photons * state
        a = 1j * np.vdot(state, dstate)
        if abs(a.imag) > 1e-12:
            raise ArithmeticError(f"Berry connection not real at psi={psi}: {a}")
        connection[k] = a.real
    return float(connection.sum() * (2.0 * np.pi / num_points))
