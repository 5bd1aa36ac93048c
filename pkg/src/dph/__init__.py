"""Geometric phases of a dressed two-level system under pure dephasing."""
from .closed_form import (
    DecoherenceFactor,
    PhaseResult,
    decoherence_factor,
    pointer_limit_phase,
    pure_phase_discrete,
    pure_phase_ohmic,
    pure_phase_weak,
)
from .errors import (
    ConvergenceError,
    DegeneracyError,
    DimensionError,
    DomainError,
    DphError,
    NotAsymptoticError,
    TruncationError,
)
from .mixed_state import InitialSuperposition, long_time_phase, mixed_geometric_phase, reduced_density
from .model import BathMode, Branch, OhmicSpectrum, SystemParams, discretize_ohmic, make_bath

__version__ = "0.1.0"
