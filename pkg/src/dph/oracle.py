"""
Brute-force universe propagation
================================

Independent check on every closed-form result: the doublet Hamiltonian

    H_n = E+ |+><+| + E- |-><-| + sum_j omega_j b_j^dag b_j
          + sqrt(n+1) (|+><+| - |-><-|) sum_j lambda_j (b_j^dag + b_j)

is built as a dense matrix on {plus, minus} x Fock(d_1) x ... x Fock(d_J),
diagonalised once, and the state is stepped with the exact propagator
exp(-i H dt). Nothing here uses the analytic phase or decoherence formulas.

Basis ordering is branch-major: index = branch * prod(d) + flat bath index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .errors import ConvergenceError, DimensionError, DomainError, TruncationError
from .mixed_state import QubitDensityMatrix
from .model import BathMode, Branch, SystemParams, bath_arrays, dressed_energies

DEFAULT_MAX_DIM = 2**16
DEFAULT_LEAKAGE = 1e-10
NORM_DRIFT_TOL = 1e-9
EDGE_POPULATION_TOL = 1e-12


@dataclass(frozen=True)
class TruncationSpec:
    levels_per_mode: tuple[int, ...]
    time_step: float

    def __post_init__(self):
        levels = tuple(int(d) for d in self.levels_per_mode)
        if any(d < 2 for d in levels):
            raise DomainError(f"every Fock cutoff must be >= 2, got {levels}")
        if not self.time_step > 0:
            raise DomainError(f"time_step must be positive, got {self.time_step}")
        object.__setattr__(self, "levels_per_mode", levels)

    @property
    def bath_dim(self) -> int:
        return int(np.prod(self.levels_per_mode, dtype=np.int64)) if self.levels_per_mode else 1

    @property
    def dim(self) -> int:
        return 2 * self.bath_dim

    @classmethod
    def for_bath(cls, params: SystemParams, bath: Sequence[BathMode], time_step: float,
                 leakage: float = DEFAULT_LEAKAGE, margin: int = 4) -> "TruncationSpec":
        """Smallest cutoffs whose Poisson tail at the worst-case displacement 2 Lambda_j / omega_j
        is below ``leakage``, plus ``margin`` extra levels."""
        freqs, lams = bath_arrays(bath)
        x = 2.0 * np.abs(lams) * math.sqrt(params.n + 1) / freqs
        levels = []
        for xj in x:
            d = 1
            while stats.poisson.sf(d - 1, xj * xj) >= leakage:
                d += 1
            levels.append(max(2, d + margin))
        return cls(tuple(levels), time_step)


def leakage_bound(x: float, levels: int) -> float:
    """Poisson occupation beyond ``levels`` for a coherent amplitude ``x``."""
    return float(stats.poisson.sf(levels - 1, x * x))


@dataclass
class UniverseState:
    """Amplitudes with shape (2, d_1, ..., d_J); axis 0 is (plus, minus)."""

    amplitudes: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def _lowering(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)


def _embed(op: np.ndarray, j: int, levels: Sequence[int]) -> np.ndarray:
    factors = [op if k == j else np.eye(d) for k, d in enumerate(levels)]
    return reduce(np.kron, factors, np.eye(1))


def build_hamiltonian(params: SystemParams, bath: Sequence[BathMode], trunc: TruncationSpec,
                      max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    levels = trunc.levels_per_mode
    if len(levels) != len(bath):
        raise DomainError(f"truncation lists {len(levels)} modes but the bath has {len(bath)}")
    if trunc.dim > max_dim:
        raise DimensionError(f"oracle dimension {trunc.dim} exceeds cap {max_dim}")
    e_plus, e_minus = dressed_energies(params)
    nb = trunc.bath_dim
    free = np.zeros((nb, nb))
    drive = np.zeros((nb, nb))
    root = math.sqrt(params.n + 1)
    for j, mode in enumerate(bath):
        b = _lowering(levels[j])
        free += mode.frequency * _embed(b.T @ b, j, levels)
        drive += root * mode.coupling * _embed(b + b.T, j, levels)
    eye = np.eye(nb)
    H = np.zeros((2 * nb, 2 * nb), dtype=complex)
    H[:nb, :nb] = e_plus * eye + free + drive
    H[nb:, nb:] = e_minus * eye + free - drive
    return H


def coherent_state(beta: complex, d: int) -> np.ndarray:
    """D(beta)|0> built from the truncated ladder operators."""
    b = _lowering(d)
    gen = beta * b.T - np.conj(beta) * b
    return linalg.expm(gen)[:, 0]


def displaced_bath_state(amplitudes: Sequence[complex], levels: Sequence[int]) -> np.ndarray:
    """Product of b-mode coherent states, shape ``levels``."""
    vecs = [coherent_state(beta, d) for beta, d in zip(amplitudes, levels)]
    out = reduce(np.multiply.outer, vecs, np.ones(()))
    return np.asarray(out, dtype=complex).reshape(tuple(levels))


def b_amplitude(branch: Branch | str, alpha: complex, x: float) -> complex:
    """b-mode amplitude of a coherent state with amplitude ``alpha`` in the shifted mode
    B_pm = b +- x (x = Lambda/omega)."""
    return alpha - Branch.parse(branch).sign * x


def prepare_state(c_plus: complex, c_minus: complex, params: SystemParams, bath: Sequence[BathMode],
                  trunc: TruncationSpec, bath_amplitudes: Sequence[complex] | None = None) -> UniverseState:
    """(c+|+> + c-|->) x (bath); the bath defaults to the b-mode vacuum."""
    levels = trunc.levels_per_mode
    if bath_amplitudes is None:
        bath_amplitudes = [0.0] * len(levels)
    env = displaced_bath_state(bath_amplitudes, levels)
    amps = np.stack([c_plus * env, c_minus * env])
    state = UniverseState(amps)
    if abs(state.norm - 1.0) > 1e-9:
        raise TruncationError(f"initial state norm {state.norm:.12f}; raise the Fock cutoffs")
    return state


def prepare_displaced_eigenstate(params: SystemParams, bath: Sequence[BathMode], trunc: TruncationSpec,
                                 branch: Branch | str) -> UniverseState:
    """|pm(n)> x prod_j |pm Lambda_j/omega_j> with the coherent states taken in the shifted B_pm modes."""
    branch = Branch.parse(branch)
    freqs, lams = bath_arrays(bath)
    x = lams * math.sqrt(params.n + 1) / freqs
    betas = [b_amplitude(branch, branch.sign * xj, xj) for xj in x]
    c = (1.0, 0.0) if branch is Branch.PLUS else (0.0, 1.0)
    return prepare_state(*c, params, bath, trunc, betas)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (num_samples, dim)
    levels: tuple[int, ...]

    def state(self, index: int) -> UniverseState:
        return UniverseState(self.states[index].reshape((2,) + self.levels))


def _edge_population(states: np.ndarray, levels: tuple[int, ...]) -> float:
    worst = 0.0
    amps = np.abs(states.reshape((states.shape[0], 2) + levels)) ** 2
    for j, d in enumerate(levels):
        top = np.take(amps, d - 1, axis=2 + j)
        worst = max(worst, float(top.reshape(states.shape[0], -1).sum(axis=1).max()))
    return worst


def propagate(state0: UniverseState, H: np.ndarray, T: float, trunc: TruncationSpec,
              edge_tol: float = EDGE_POPULATION_TOL, even_steps: bool = False) -> Trajectory:
    """Step ``state0`` to time T with exp(-i H dt); every step is stored.

    The step is shrunk so that an integer number of steps (even, if requested)
    lands exactly on T.
    Raises :class:`TruncationError` on norm drift or when the top Fock level of
    any mode picks up more than ``edge_tol`` population.
    """
    if not T >= 0:
        raise DomainError(f"duration must be non-negative, got {T}")
    psi0 = state0.vector.astype(complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise DomainError("initial state is not normalized")
    nsteps = max(1, math.ceil(T / trunc.time_step - 1e-12)) if T > 0 else 0
    if even_steps:
        nsteps += nsteps % 2
    dt = T / nsteps if nsteps else 0.0
    energies, vecs = np.linalg.eigh(H)
    step = (vecs * np.exp(-1j * energies * dt)) @ vecs.conj().T
    states = np.empty((nsteps + 1, psi0.size), dtype=complex)
    states[0] = psi0
    for i in range(nsteps):
        states[i + 1] = step @ states[i]
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > NORM_DRIFT_TOL:
        raise TruncationError(f"norm drift {drift:.3e} exceeds {NORM_DRIFT_TOL:.0e}")
    levels = trunc.levels_per_mode
    if levels:
        edge = _edge_population(states, levels)
        if edge > edge_tol:
            raise TruncationError(
                f"top Fock level population {edge:.3e} exceeds {edge_tol:.0e}; couplings exceed the truncation budget"
            )
    times = np.linspace(0.0, T, nsteps + 1)
    return Trajectory(times, states, levels)


def energy_series(traj: Trajectory, H: np.ndarray) -> np.ndarray:
    return np.einsum("ti,ij,tj->t", traj.states.conj(), H, traj.states).real


def _phase_from_samples(times: np.ndarray, states: np.ndarray, H: np.ndarray) -> float:
    overlaps = states @ states[0].conj()
    arg = np.unwrap(np.angle(overlaps))[-1]
    energy = np.einsum("ti,ij,tj->t", states.conj(), H, states).real
    return float(arg + np.trapezoid(energy, times))


def pure_phase_numeric(traj: Trajectory, H: np.ndarray, tol: float | None = None) -> float:
    """arg <Psi(0)|Psi(T)> (unwrapped along the samples) + int_0^T <Psi|H|Psi> dt.

    With ``tol`` set, the same functional is also evaluated on every other sample
    (twice the step) and a :class:`ConvergenceError` is raised if they differ by more.
    """
    phase = _phase_from_samples(traj.times, traj.states, H)
    if tol is not None:
        if (len(traj.times) - 1) % 2:
            raise DomainError("step-halving check needs an even number of steps")
        coarse = _phase_from_samples(traj.times[::2], traj.states[::2], H)
        if abs(coarse - phase) > tol:
            raise ConvergenceError(f"oracle phase moved by {abs(coarse - phase):.3e} under step halving")
    return phase


def reduced_density_numeric(traj: Trajectory, index: int) -> QubitDensityMatrix:
    """Partial trace over every bath Fock index of sample ``index``."""
    amps = traj.states[index].reshape(2, -1)
    return QubitDensityMatrix(amps @ amps.conj().T)


def coherent_fidelities(traj: Trajectory, params: SystemParams, bath: Sequence[BathMode],
                        branch: Branch | str) -> np.ndarray:
    """|<expected(t)|Psi(t)>|^2 against |pm(n)> x prod_j |pm x_j e^{-i omega_j t}> (shifted modes)."""
    branch = Branch.parse(branch)
    freqs, lams = bath_arrays(bath)
    x = lams * math.sqrt(params.n + 1) / freqs
    out = np.empty(len(traj.times))
    for i, t in enumerate(traj.times):
        alphas = branch.sign * x * np.exp(-1j * freqs * t)
        betas = [b_amplitude(branch, a, xj) for a, xj in zip(alphas, x)]
        c = (1.0, 0.0) if branch is Branch.PLUS else (0.0, 1.0)
        expected = prepare_state(*c, params, bath, TruncationSpec(traj.levels, 1.0), betas).vector
        out[i] = abs(np.vdot(expected, traj.states[i])) ** 2
    return out


def branch_leakage(traj: Trajectory, branch: Branch | str) -> float:
    """Largest population found on the branch opposite to ``branch``."""
    other = 1 if Branch.parse(branch) is Branch.PLUS else 0
    amps = traj.states.reshape(len(traj.times), 2, -1)
    return float((np.abs(amps[:, other]) ** 2).sum(axis=1).max())


def oracle_pure_phase(params: SystemParams, bath: Sequence[BathMode], branch: Branch | str, T: float,
                      time_step: float = 0.01, tol: float | None = None,
                      trunc: TruncationSpec | None = None) -> float:
    """Environment part of the universe phase from a full brute-force run."""
    if trunc is None:
        trunc = TruncationSpec.for_bath(params, bath, time_step)
    H = build_hamiltonian(params, bath, trunc)
    c = (1.0, 0.0) if Branch.parse(branch) is Branch.PLUS else (0.0, 1.0)
    state0 = prepare_state(*c, params, bath, trunc)
    traj = propagate(state0, H, T, trunc, even_steps=tol is not None)
    return pure_phase_numeric(traj, H, tol)


def oracle_density_trajectory(c_plus: complex, c_minus: complex, params: SystemParams,
                              bath: Sequence[BathMode], times: np.ndarray,
                              trunc: TruncationSpec | None = None) -> np.ndarray:
    """Partial-trace rho at uniformly spaced ``times`` (must start at 0), shape (len(times), 2, 2)."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise DomainError("oracle time grid must start at 0")
    steps = len(times) - 1
    T = float(times[-1])
    if not np.allclose(np.diff(times), T / steps, rtol=1e-9, atol=1e-12):
        raise DomainError("oracle time grid must be uniform")
    if trunc is None:
        trunc = TruncationSpec.for_bath(params, bath, T / steps)
    else:
        trunc = TruncationSpec(trunc.levels_per_mode, T / steps)
    H = build_hamiltonian(params, bath, trunc)
    traj = propagate(prepare_state(c_plus, c_minus, params, bath, trunc), H, T, trunc)
    return np.stack([reduced_density_numeric(traj, i).matrix for i in range(len(traj.times))])
