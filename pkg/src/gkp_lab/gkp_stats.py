"""Gaussian shift-error statistics of a single square-lattice GKP qubit.

Shifts are modelled as zero-mean Gaussians of variance ``variance`` (vacuum
variance = 1).  A bit value is read by binning the measured quadrature onto the
``sqrt(pi)`` lattice; with clipping, outcomes within ``mu_up`` of a bin edge are
discarded.  All probabilities are evaluated with ``erf``/``erfc`` in double
precision; lattice sums are folded about the origin so results are exactly
symmetric in the sign of the shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegeneratePolicyError, DomainError

SQRT_PI = math.sqrt(math.pi)
HALF_BIN = SQRT_PI / 2.0

# below this the Gaussian is treated as a point mass at the origin
_TINY_VARIANCE = 1e-15


@dataclass(frozen=True)
class SqueezingSpec:
    """Squeezing carried both in dB and as the quadrature variance ``10**(-db/10)``."""

    db: float
    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.db) or not (self.variance > 0.0):
            raise DomainError(f"invalid squeezing: db={self.db!r}, variance={self.variance!r}")

    @classmethod
    def from_db(cls, db: float) -> "SqueezingSpec":
        return cls(float(db), db_to_variance(db))

    @classmethod
    def from_variance(cls, variance: float) -> "SqueezingSpec":
        if not (variance > 0.0) or not math.isfinite(variance):
            raise DomainError(f"variance must be positive and finite, got {variance!r}")
        return cls(-10.0 * math.log10(variance), float(variance))


@dataclass(frozen=True)
class ClipPolicy:
    """Clipping threshold; ``mu_up = 0`` is the unclipped scheme."""

    mu_up: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.mu_up < HALF_BIN):
            raise DomainError(f"mu_up must satisfy 0 <= mu_up < sqrt(pi)/2, got {self.mu_up!r}")

    @property
    def half_width(self) -> float:
        """Half-width of each acceptance window around a lattice point."""
        return HALF_BIN - self.mu_up


NO_CLIP = ClipPolicy(0.0)


@dataclass(frozen=True)
class LatticeSumConfig:
    """Truncation of the lattice sums.

    ``max_abs_n=None`` picks ``max(3, ceil(6*sqrt(variance)/sqrt(pi)) + 2)``
    per call, which leaves the dropped tail far below ``term_tol``.
    """

    max_abs_n: int | None = None
    term_tol: float = 1e-18

    def __post_init__(self) -> None:
        if self.max_abs_n is not None and self.max_abs_n < 0:
            raise DomainError("max_abs_n must be non-negative")
        if not (self.term_tol > 0.0):
            raise DomainError("term_tol must be positive")

    def bound(self, variance: float) -> int:
        if self.max_abs_n is not None:
            return self.max_abs_n
        return max(3, math.ceil(6.0 * math.sqrt(variance) / SQRT_PI) + 2)


DEFAULT_LATTICE = LatticeSumConfig()


def _check_variance(variance: float) -> float:
    variance = float(variance)
    if not (variance > 0.0) or not math.isfinite(variance):
        raise DomainError(f"variance must be positive and finite, got {variance!r}")
    return variance


def db_to_variance(db: float) -> float:
    """Quadrature variance ``10**(-db/10)`` for a squeezing level in dB."""
    db = float(db)
    if not math.isfinite(db):
        raise DomainError(f"db must be finite, got {db!r}")
    return 10.0 ** (-db / 10.0)


def variance_to_db(variance: float) -> float:
    return -10.0 * math.log10(_check_variance(variance))


def misid_probability(variance: float) -> float:
    """Gaussian mass outside the central bin ``[-sqrt(pi)/2, sqrt(pi)/2]``.

    This is the "mass outside the central bin" notion of a misidentified bit.
    It differs from :func:`odd_bin_misid_probability` once the variance is
    large enough for mass to reach the next correct bin.
    """
    variance = _check_variance(variance)
    if variance < _TINY_VARIANCE:
        return 0.0
    return math.erfc(HALF_BIN / math.sqrt(2.0 * variance))


def _positive_window(a: float, b: float, scale: float) -> float:
    # mass of [a, b] with 0 <= a <= b, scale = sqrt(2 * variance)
    if b <= a:
        return 0.0
    return 0.5 * (math.erfc(a / scale) - math.erfc(b / scale))


def _clip_parts(variance: float, policy: ClipPolicy, cfg: LatticeSumConfig) -> tuple[float, float]:
    variance = _check_variance(variance)
    w = policy.half_width
    if w <= 0.0:
        return 0.0, 0.0
    if variance < _TINY_VARIANCE:
        return 1.0, 0.0
    scale = math.sqrt(2.0 * variance)
    nmax = cfg.bound(variance)

    # correct windows are centred on 2n*sqrt(pi), incorrect ones on (2n+1)*sqrt(pi)
    correct = math.erf(w / scale)
    for n in range(1, nmax + 1):
        c = 2 * n * SQRT_PI
        correct += 2.0 * _positive_window(c - w, c + w, scale)
    incorrect = 0.0
    for n in range(0, nmax + 1):
        c = (2 * n + 1) * SQRT_PI
        incorrect += 2.0 * _positive_window(c - w, c + w, scale)
    return correct, incorrect


def clip_correct(
    variance: float, policy: ClipPolicy = NO_CLIP, cfg: LatticeSumConfig = DEFAULT_LATTICE
) -> float:
    """Probability that the shift lands in an accepted window of the correct parity."""
    return _clip_parts(variance, policy, cfg)[0]


def clip_incorrect(
    variance: float, policy: ClipPolicy = NO_CLIP, cfg: LatticeSumConfig = DEFAULT_LATTICE
) -> float:
    """Probability that the shift lands in an accepted window of the wrong parity."""
    return _clip_parts(variance, policy, cfg)[1]


def clip_success(
    variance: float, policy: ClipPolicy = NO_CLIP, cfg: LatticeSumConfig = DEFAULT_LATTICE
) -> float:
    """Probability that the outcome survives clipping (correct + incorrect)."""
    correct, incorrect = _clip_parts(variance, policy, cfg)
    return correct + incorrect


def clip_conditional_error(
    variance: float, policy: ClipPolicy = NO_CLIP, cfg: LatticeSumConfig = DEFAULT_LATTICE
) -> float:
    """Bit-error probability conditioned on the outcome being kept.

    Raises :class:`DegeneratePolicyError` if the kept mass underflows to zero.
    """
    correct, incorrect = _clip_parts(variance, policy, cfg)
    total = correct + incorrect
    if total <= 0.0:
        raise DegeneratePolicyError(
            f"clipping keeps no probability mass (variance={variance!r}, mu_up={policy.mu_up!r})"
        )
    # odd bins never outweigh even bins for a centred Gaussian; clamp rounding
    return min(0.5, incorrect / total)


def odd_bin_misid_probability(variance: float, cfg: LatticeSumConfig = DEFAULT_LATTICE) -> float:
    """Mass landing in odd lattice bins: the unclipped lattice-binned bit error."""
    return clip_incorrect(variance, NO_CLIP, cfg)


def binary_entropy(p: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
