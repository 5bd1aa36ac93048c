"""Exception hierarchy shared by the library and the command line front end."""


class DphError(Exception):
    """Base class for all errors raised by :mod:`dph`."""


class DomainError(DphError, ValueError):
    """Inputs outside the domain of an operation (negative durations, bad amplitudes...)."""


class DegeneracyError(DphError):
    """Eigenvectors of the reduced density matrix are ill-defined over the requested window."""


class ConvergenceError(DphError):
    """A refinement check (step doubling or halving) moved the result beyond tolerance."""


class NotAsymptoticError(DphError):
    """The decoherence factor has not decayed enough for the pointer-state limit to apply."""


class TruncationError(DphError):
    """Fock-space truncation is too small for the requested couplings (leakage or norm drift)."""


class DimensionError(DphError):
    """Dense oracle Hilbert space would exceed the configured dimension cap."""
