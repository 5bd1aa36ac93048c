"""
Reduced qubit state and its kinematic geometric phase
=====================================================

Tracing the bath out of (c+|+(n)> + c-|-(n)>) x (bath vacuum) leaves, in the
dressed basis {|+(n)>, |-(n)>},

    rho(t) = [[ |c+|^2,             c+ conj(c-) F(t) ],
              [ conj(c+) c- F*(t),  |c-|^2           ]]

Populations never change (pure dephasing); only the coherence is damped and
rotated by F(t).

The mixed-state phase of a sampled path rho(t_0..t_N) is

    arg sum_k sqrt(e_k(0) e_k(T)) |<psi_k(0)|psi_k(T)>| exp(i beta_k),

where beta_k is the argument of the Bargmann chain
<psi_k(0)|psi_k(T)> <psi_k(T)|psi_k(t_{N-1})> ... <psi_k(t_1)|psi_k(0)>.
Every eigenvector appears once as a bra and once as a ket, so the chain is
unchanged by any per-sample rephasing, and as the grid is refined it converges
to the endpoint overlap times exp(-int <psi_k|d/dt psi_k> dt).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .closed_form import check_normalized, decoherence_series, pointer_limit_phase
from .errors import ConvergenceError, DegeneracyError, DomainError, NotAsymptoticError
from .model import BathMode, SystemParams

DEGENERACY_GAP = 1e-10
POINTER_THRESHOLD = 1e-8
MAX_BRIDGE = 8


@dataclass(frozen=True)
class InitialSuperposition:
    c_plus: complex
    c_minus: complex

    def __post_init__(self):
        object.__setattr__(self, "c_plus", complex(self.c_plus))
        object.__setattr__(self, "c_minus", complex(self.c_minus))
        check_normalized(self.c_plus, self.c_minus)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c_plus) ** 2, abs(self.c_minus) ** 2


@dataclass(frozen=True)
class QubitDensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError(f"density matrix must be 2x2, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-12:
            raise DomainError(f"density matrix trace is {np.trace(m).real!r}, expected 1")
        det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
        if det < -1e-12:
            raise DomainError(f"density matrix is not positive (det = {det:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def coherence(self) -> complex:
        """The (+, -) element."""
        return complex(self.matrix[0, 1])


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order; ``eigenvectors[:, k]`` belongs to ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gauge: str = "largest-component-real"
    degenerate: bool = False


@dataclass
class MixedPhase:
    phase: float
    times: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    valid: np.ndarray = field(repr=False)

    @property
    def bridged(self) -> int:
        """Number of degenerate samples skipped by the chain."""
        return int(np.count_nonzero(~self.valid))


def _as_superposition(init) -> InitialSuperposition:
    if isinstance(init, InitialSuperposition):
        return init
    c_plus, c_minus = init
    return InitialSuperposition(c_plus, c_minus)


def density_series(init, params: SystemParams, bath: Sequence[BathMode], times) -> np.ndarray:
    """rho(t) for every t in ``times``, shape (len(times), 2, 2)."""
    init = _as_superposition(init)
    F, _ = decoherence_series(params, bath, times)
    p_plus, p_minus = init.populations
    coherence = init.c_plus * np.conj(init.c_minus) * F
    rho = np.empty((F.size, 2, 2), dtype=complex)
    rho[:, 0, 0] = p_plus
    rho[:, 1, 1] = p_minus
    rho[:, 0, 1] = coherence
    rho[:, 1, 0] = np.conj(coherence)
    return rho


def reduced_density(init, params: SystemParams, bath: Sequence[BathMode], t: float) -> QubitDensityMatrix:
    if not t >= 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return QubitDensityMatrix(density_series(init, params, bath, [t])[0])


def printed_eigenvalues(c_plus: complex, c_minus: complex, F: complex) -> tuple[float, float]:
    """1/2 +- 1/2 sqrt((|c+|^2 - |c-|^2)^2 + 4 |c+* c- F|^2)."""
    root = math.sqrt((abs(c_plus) ** 2 - abs(c_minus) ** 2) ** 2 + 4 * abs(np.conj(c_plus) * c_minus * F) ** 2)
    return 0.5 + 0.5 * root, 0.5 - 0.5 * root


def _bloch_eigensystem(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched closed-form diagonalisation of 2x2 Hermitian matrices.

    Writes rho = (tr + r.sigma)/2 and builds eigenvectors from the polar angles of
    r, which stays accurate however small |r| is (a generic solver loses the
    eigenvector direction once the gap approaches machine precision).
    """
    a = rho[..., 0, 0].real
    d = rho[..., 1, 1].real
    b = rho[..., 0, 1]
    tr = a + d
    rz = a - d
    rperp = 2.0 * np.abs(b)
    r = np.hypot(rz, rperp)
    evals = np.stack([0.5 * (tr + r), 0.5 * (tr - r)], axis=-1)
    evals = np.clip(evals, 0.0, 1.0)

    theta = np.arctan2(rperp, rz)
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    phase = np.exp(-1j * np.angle(b))  # conj(b)/|b|, and 1 when b = 0

    vecs = np.empty(rho.shape, dtype=complex)
    upper_first = c >= s
    # upper eigenvector (c, e^{i phi} s); rotate so the larger component is real >= 0
    vecs[..., 0, 0] = np.where(upper_first, c, c * np.conj(phase))
    vecs[..., 1, 0] = np.where(upper_first, phase * s, s)
    # lower eigenvector (-e^{-i phi} s, c)
    vecs[..., 0, 1] = np.where(upper_first, -np.conj(phase) * s, s)
    vecs[..., 1, 1] = np.where(upper_first, c, -phase * c)
    return evals, vecs, r


def eigendecompose(rho: QubitDensityMatrix | np.ndarray) -> SpectralDecomposition:
    matrix = rho.matrix if isinstance(rho, QubitDensityMatrix) else QubitDensityMatrix(rho).matrix
    evals, vecs, r = _bloch_eigensystem(matrix[None])
    return SpectralDecomposition(evals[0], vecs[0], degenerate=bool(r[0] < DEGENERACY_GAP))


def track_eigenframes(eigenvalues: np.ndarray, eigenvectors: np.ndarray, valid: np.ndarray):
    """Relabel eigenpairs so each branch follows maximal overlap with the last valid sample."""
    eigenvalues = eigenvalues.copy()
    eigenvectors = eigenvectors.copy()
    prev = None
    for i in range(len(eigenvalues)):
        if not valid[i]:
            continue
        if prev is not None:
            ov = np.abs(eigenvectors[prev].conj().T @ eigenvectors[i]) ** 2
            if ov[0, 1] + ov[1, 0] > ov[0, 0] + ov[1, 1]:
                eigenvalues[i] = eigenvalues[i, ::-1]
                eigenvectors[i] = eigenvectors[i, :, ::-1]
        prev = i
    return eigenvalues, eigenvectors


def kinematic_phase(eigenvalues: np.ndarray, eigenvectors: np.ndarray, valid: np.ndarray | None = None) -> float:
    """Weighted Bargmann-chain phase of an already tracked eigenframe path.

    ``eigenvalues`` has shape (N+1, 2), ``eigenvectors`` (N+1, 2, 2) with columns
    as eigenvectors; samples where ``valid`` is False are skipped.
    """
    if valid is None:
        valid = np.ones(len(eigenvalues), dtype=bool)
    idx = np.flatnonzero(valid)
    if idx.size < 2 or idx[0] != 0 or idx[-1] != len(eigenvalues) - 1:
        raise DegeneracyError("eigenframe undefined at an endpoint of the window")
    vecs = eigenvectors[idx]
    total = 0j
    for k in range(2):
        path = vecs[:, :, k]
        links = np.einsum("ij,ij->i", path[1:].conj(), path[:-1])  # <psi_{i+1}|psi_i>
        closing = np.vdot(path[0], path[-1])
        beta = np.angle(closing) + np.sum(np.angle(links))
        weight = math.sqrt(eigenvalues[0, k] * eigenvalues[-1, k])
        total += weight * abs(closing) * np.exp(1j * beta)
    return math.atan2(total.imag + 0.0, total.real)


def _degenerate_mask(gaps: np.ndarray, max_bridge: int) -> np.ndarray:
    valid = gaps >= DEGENERACY_GAP
    if valid.all():
        return valid
    if not (valid[0] and valid[-1]):
        raise DegeneracyError("eigenvalues degenerate at an endpoint; eigenvectors are undefined there")
    run = 0
    for ok in valid:
        run = 0 if ok else run + 1
        if run > max_bridge:
            raise DegeneracyError(
                f"eigenvalues degenerate over more than {max_bridge} consecutive samples; eigentracking is ill-defined"
            )
    return valid


def eigenframe_path(init, params: SystemParams, bath: Sequence[BathMode], T: float, steps: int,
                    max_bridge: int = MAX_BRIDGE):
    """Sample, diagonalise and track rho(t) on t_i = i T / steps."""
    if isinstance(steps, bool) or int(steps) != steps or steps < 2:
        raise DomainError(f"steps must be an integer >= 2, got {steps}")
    if not T > 0:
        raise DomainError(f"duration T must be positive, got {T}")
    times = np.linspace(0.0, T, int(steps) + 1)
    rho = density_series(init, params, bath, times)
    return (times,) + eigenframes(rho, max_bridge)


def eigenframes(rho: np.ndarray, max_bridge: int = MAX_BRIDGE):
    """Diagonalise and track a sampled path of density matrices, shape (N+1, 2, 2).

    Returns (eigenvalues, eigenvectors, valid) ready for :func:`kinematic_phase`.
    """
    evals, vecs, gaps = _bloch_eigensystem(np.asarray(rho, dtype=complex))
    valid = _degenerate_mask(gaps, max_bridge)
    evals, vecs = track_eigenframes(evals, vecs, valid)
    return evals, vecs, valid


def _wrapped_difference(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2.0 * math.pi))


def mixed_geometric_phase(
    init,
    params: SystemParams,
    bath: Sequence[BathMode],
    T: float,
    steps: int = 2048,
    tol: float | None = None,
    full_output: bool = False,
):
    """Kinematic geometric phase of the reduced qubit state over [0, T], principal value.

    With ``tol`` set, the evaluation is repeated at ``2 * steps`` and
    :class:`ConvergenceError` is raised when the two disagree by more than ``tol``.
    """
    init = _as_superposition(init)
    times, evals, vecs, valid = eigenframe_path(init, params, bath, T, steps)
    phase = kinematic_phase(evals, vecs, valid)
    if tol is not None:
        fine = mixed_geometric_phase(init, params, bath, T, 2 * int(steps))
        diff = _wrapped_difference(phase, fine)
        if diff > tol:
            raise ConvergenceError(
                f"mixed phase changed by {diff:.3e} rad when steps doubled from {steps} (tol {tol:.1e})"
            )
    if full_output:
        return MixedPhase(phase, times, evals, vecs, valid)
    return phase


def long_time_phase(init, params: SystemParams, bath: Sequence[BathMode], T: float) -> float:
    """Pointer-state phase, valid only once |F(T)| has decayed below ``POINTER_THRESHOLD``."""
    init = _as_superposition(init)
    if not T >= 0:
        raise DomainError(f"duration T must be non-negative, got {T}")
    F, _ = decoherence_series(params, bath, [T])
    if abs(F[0]) >= POINTER_THRESHOLD:
        raise NotAsymptoticError(f"|F(T)| = {abs(F[0]):.3e} is not below {POINTER_THRESHOLD:.0e}")
    return pointer_limit_phase(init.c_plus, init.c_minus, params.n)
