"""Fiber loss and the variance bookkeeping of loss, amplification and relay GEC.

Both quadratures are assumed to carry the same variance, so a single number
describes the shift noise of a mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

ATTENUATION_LENGTH_KM = 22.0


@dataclass(frozen=True)
class FiberSpec:
    attenuation_length_km: float = ATTENUATION_LENGTH_KM

    def __post_init__(self) -> None:
        if not (self.attenuation_length_km > 0.0):
            raise DomainError("attenuation length must be positive")


DEFAULT_FIBER = FiberSpec()


@dataclass(frozen=True)
class SegmentPlan:
    """A chain Alice -> R1 -> ... -> R_mqr -> Bob of ``mqr + 1`` equal hops."""

    total_km: float
    mqr: int

    def __post_init__(self) -> None:
        if not (self.total_km >= 0.0) or not math.isfinite(self.total_km):
            raise DomainError(f"total distance must be non-negative, got {self.total_km!r}")
        if self.mqr < 0 or int(self.mqr) != self.mqr:
            raise DomainError(f"station count must be a non-negative integer, got {self.mqr!r}")

    @property
    def hops(self) -> int:
        return self.mqr + 1

    @property
    def segment_km(self) -> float:
        return self.total_km / self.hops


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta!r}")
    return eta


def transmissivity(distance_km: float, fiber: FiberSpec = DEFAULT_FIBER) -> float:
    """``exp(-L / L_att)``."""
    distance_km = float(distance_km)
    if not (distance_km >= 0.0):
        raise DomainError(f"distance must be non-negative, got {distance_km!r}")
    return math.exp(-distance_km / fiber.attenuation_length_km)


def loss_variance_update(variance: float, eta: float) -> float:
    """Variance after a pure-loss channel: ``eta * variance + 1 - eta``."""
    eta = _check_eta(eta)
    if not (variance >= 0.0):
        raise DomainError(f"variance must be non-negative, got {variance!r}")
    return eta * variance + 1.0 - eta


def amp_gec_noise(eta: float) -> float:
    """Added Gaussian variance of loss followed by amplification, ``(1 - eta) / eta``."""
    eta = _check_eta(eta)
    return (1.0 - eta) / eta


def relay_gec_noise(eta: float) -> float:
    """Added variance when the relay sees an effective efficiency ``sqrt(eta)``."""
    root = math.sqrt(_check_eta(eta))
    return (1.0 - root) / root
