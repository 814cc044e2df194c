"""Key rates of one-way GKP repeater chains built from teleamplification stations.

Three station variants are modelled:

* ``Protocol.I``   teleportation GEC after loss + amplification, no clipping;
* ``Protocol.II``  as I, with clipped syndrome readout;
* ``Protocol.III`` relay-style amplification inside GEC (effective efficiency
  ``sqrt(eta)``), clipping optional.

Each station contributes a logical X and a logical Z error with equal
probability, taken as the bit error of one quadrature syndrome at effective
variance ``2 * var + added_noise``.  Errors compose over the chain as
independent bit flips, and every station post-selects independently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from ._parallel import ordered_map
from .channel_model import (
    DEFAULT_FIBER,
    FiberSpec,
    SegmentPlan,
    amp_gec_noise,
    relay_gec_noise,
    transmissivity,
)
from .errors import DomainError, NoPositiveRateError
from .gkp_stats import (
    DEFAULT_LATTICE,
    NO_CLIP,
    ClipPolicy,
    LatticeSumConfig,
    SqueezingSpec,
    binary_entropy,
    clip_conditional_error,
    clip_success,
)


class Protocol(enum.IntEnum):
    I = 1
    II = 2
    III = 3


@dataclass(frozen=True)
class ProtocolConfig:
    variant: Protocol
    mqr: int
    squeezing: SqueezingSpec
    clip: ClipPolicy = NO_CLIP
    fiber: FiberSpec = DEFAULT_FIBER
    lattice: LatticeSumConfig = field(default=DEFAULT_LATTICE, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Protocol(self.variant))
        if self.mqr < 0 or int(self.mqr) != self.mqr:
            raise DomainError(f"mqr must be a non-negative integer, got {self.mqr!r}")
        if self.variant is Protocol.I and self.clip.mu_up != 0.0:
            raise DomainError("protocol I is unclipped; mu_up must be 0")


@dataclass(frozen=True)
class KeyRatePoint:
    total_km: float
    e_ab_x: float
    e_ab_z: float
    p_suc_total: float
    kappa: float


def effective_variance(config: ProtocolConfig, segment_km: float) -> float:
    """Syndrome variance seen by one GEC station after a hop of ``segment_km``."""
    eta = transmissivity(segment_km, config.fiber)
    if eta == 0.0:
        return math.inf
    if config.variant is Protocol.III:
        added = relay_gec_noise(eta)
    else:
        added = amp_gec_noise(eta)
    if config.mqr == 0:
        # direct transmission: Bob measures the received mode, no ancilla noise
        return config.squeezing.variance + added
    return 2.0 * config.squeezing.variance + added


def station_error(config: ProtocolConfig, segment_km: float) -> tuple[float, float, float]:
    """Per-station ``(e_x, e_z, p_suc)`` for one hop of ``segment_km``."""
    v = effective_variance(config, segment_km)
    if math.isinf(v):
        # loss has erased the signal: the readout is a fair coin
        return 0.5, 0.5, 1.0 - config.clip.mu_up / (math.sqrt(math.pi) / 2.0)
    e = clip_conditional_error(v, config.clip, config.lattice)
    p = 1.0 if config.clip.mu_up == 0.0 else clip_success(v, config.clip, config.lattice)
    return e, e, p


def accumulate_errors(e_station: float, mqr: int) -> float:
    """Net flip probability after ``mqr`` independent flips of probability ``e_station``."""
    if not (0.0 <= e_station <= 0.5):
        raise DomainError(f"per-station error must lie in [0, 1/2], got {e_station!r}")
    if mqr < 1 or int(mqr) != mqr:
        raise DomainError(f"mqr must be a positive integer, got {mqr!r}")
    if e_station == 0.5:
        return 0.5
    # 1/2 * (1 - (1 - 2e)^M), written to keep precision for tiny e
    return min(0.5, -0.5 * math.expm1(mqr * math.log1p(-2.0 * e_station)))


def secret_key_rate(e_ab_x: float, e_ab_z: float, p_suc_total: float) -> float:
    for name, value in (("e_ab_x", e_ab_x), ("e_ab_z", e_ab_z), ("p_suc_total", p_suc_total)):
        if not (0.0 <= value <= 1.0):
            raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    rate = p_suc_total * (1.0 - binary_entropy(e_ab_x) - binary_entropy(e_ab_z))
    return min(1.0, max(0.0, rate))


def key_rate_point(config: ProtocolConfig, total_km: float) -> KeyRatePoint:
    plan = SegmentPlan(total_km, config.mqr)
    e_x, e_z, p_station = station_error(config, plan.segment_km)
    if config.mqr == 0:
        e_ab_x, e_ab_z, p_total = e_x, e_z, p_station
    else:
        e_ab_x = accumulate_errors(e_x, config.mqr)
        e_ab_z = accumulate_errors(e_z, config.mqr)
        p_total = p_station ** config.mqr
    return KeyRatePoint(
        total_km=float(total_km),
        e_ab_x=e_ab_x,
        e_ab_z=e_ab_z,
        p_suc_total=p_total,
        kappa=secret_key_rate(e_ab_x, e_ab_z, p_total),
    )


def sweep_distance(
    config: ProtocolConfig, grid: Sequence[float], workers: int | None = None
) -> list[KeyRatePoint]:
    """One :class:`KeyRatePoint` per grid distance, in grid order."""
    grid = [float(x) for x in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("distance grid must be sorted ascending")
    return ordered_map(lambda L: key_rate_point(config, L), grid, workers)


def waterfall_distance(
    config: ProtocolConfig,
    kappa_floor: float = 1e-12,
    resolution_km: float = 0.01,
    max_km: float = 1e5,
) -> float:
    """Largest distance (to ``resolution_km``) at which the key rate exceeds ``kappa_floor``.

    Assumes the key rate is non-increasing in distance.
    """

    def positive(L: float) -> bool:
        return key_rate_point(config, L).kappa > kappa_floor

    if not positive(0.0):
        raise NoPositiveRateError(
            f"key rate at zero distance does not exceed {kappa_floor:g} for {config!r}"
        )
    lo, hi = 0.0, 1.0
    while positive(hi):
        lo, hi = hi, 2.0 * hi
        if hi > max_km:
            raise RuntimeError(f"key rate still positive beyond {max_km} km")
    while hi - lo > resolution_km:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo


def with_variant(config: ProtocolConfig, variant: Protocol, clip: ClipPolicy | None = None) -> ProtocolConfig:
    """Copy of ``config`` with another station variant (and optionally clip policy)."""
    return replace(config, variant=Protocol(variant), clip=config.clip if clip is None else clip)
