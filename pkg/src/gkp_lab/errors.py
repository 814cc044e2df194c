"""Exception types raised across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegeneratePolicyError(DomainError):
    """Clipping discards (numerically) every outcome, so conditional quantities are undefined."""


class OutOfRangeError(DomainError):
    """A literal formula produced a value outside [0, 1] for the given parameters."""


class NoPositiveRateError(RuntimeError):
    """The secret key rate is not positive even at zero distance."""


class InfeasiblePNRDError(DomainError):
    """Photon-counting Bell measurement requested below the no-cloning bound."""


class EmptyFeasibleSetError(RuntimeError):
    """No point of an optimizer search space yields a usable result."""


class InconsistentOutcomeError(ValueError):
    """Homodyne parity classes that do not identify a Bell state."""
