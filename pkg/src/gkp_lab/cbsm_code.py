"""Analytic performance of the GKP-parity concatenated Bell measurement (CBSM).

A logical BSM is made of ``n`` block BSMs, each of ``m`` physical BSMs.  Per
link of length ``l0_km`` one mode travels and one stays in the station; the
effective transmissivity of a physical BSM is ``eta0 * eta_l0`` with
``eta_l0 = eta0 * exp(-l0 / L_att)``.

The per-block success and letter-failure probabilities follow the closed
forms used for the resource-cost analysis, evaluated literally::

    p_s = clip_success(2 var, mu_up)**j * (eta0 * eta_l0)**m
    p_f = sum_{k=m-j}^{m} (1/2)**(m-k) * (1 - eta0 * eta_l0)**k
    P   = (1 - p_f)**n - (1 - p_s - p_f)**n
    rate = P**(L / l0),   RC = 2 n m / rate * L / l0
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

from ._parallel import ordered_map
from .channel_model import DEFAULT_FIBER, FiberSpec
from .errors import DomainError, EmptyFeasibleSetError, InfeasiblePNRDError, OutOfRangeError
from .gkp_stats import NO_CLIP, ClipPolicy, SqueezingSpec, clip_conditional_error, clip_success

PNRD_BOUND = 0.5


class Detector(str, enum.Enum):
    HOMODYNE_CLIP = "homodyne_clip"
    PNRD = "pnrd"


@dataclass(frozen=True)
class ParityCode:
    n: int
    m: int
    j: int = 0

    def __post_init__(self) -> None:
        for name in ("n", "m", "j"):
            value = getattr(self, name)
            if int(value) != value:
                raise DomainError(f"{name} must be an integer, got {value!r}")
        if self.n < 1 or self.m < 1:
            raise DomainError(f"n and m must be >= 1, got n={self.n}, m={self.m}")
        if not (0 <= self.j <= self.m):
            raise DomainError(f"j must satisfy 0 <= j <= m, got j={self.j}, m={self.m}")


@dataclass(frozen=True)
class LinkBudget:
    eta0: float
    l0_km: float
    fiber: FiberSpec = DEFAULT_FIBER

    def __post_init__(self) -> None:
        if not (0.0 < self.eta0 <= 1.0):
            raise DomainError(f"eta0 must lie in (0, 1], got {self.eta0!r}")
        if not (self.l0_km > 0.0):
            raise DomainError(f"l0_km must be positive, got {self.l0_km!r}")

    @property
    def eta_l0(self) -> float:
        return self.eta0 * math.exp(-self.l0_km / self.fiber.attenuation_length_km)

    @property
    def eta_prod(self) -> float:
        """Effective transmissivity ``eta0 * eta_l0`` of one physical BSM."""
        return self.eta0 * self.eta_l0


@dataclass(frozen=True)
class CbsmPerformance:
    p_s: float
    p_f: float
    p_link: float
    rate: float
    rc: float
    e_logical: float


@dataclass(frozen=True)
class SearchSpace:
    j_set: tuple[int, ...]
    m_range: tuple[int, int]
    n_range: tuple[int, int]
    l0_range_km: tuple[float, float]
    l0_step_km: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "j_set", tuple(sorted(set(int(j) for j in self.j_set))))
        if not self.j_set:
            raise DomainError("j_set must not be empty")
        for name in ("m_range", "n_range", "l0_range_km"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise DomainError(f"{name} is empty: {lo} > {hi}")
        if not (self.l0_step_km > 0.0):
            raise DomainError("l0_step_km must be positive")
        if self.l0_range_km[0] <= 0.0:
            raise DomainError("l0 must be positive")

    def l0_grid(self) -> list[float]:
        lo, hi = self.l0_range_km
        count = int(math.floor((hi - lo) / self.l0_step_km + 1e-9)) + 1
        return [round(lo + k * self.l0_step_km, 10) for k in range(count)]

    def codes(self) -> Iterable[ParityCode]:
        for j in self.j_set:
            for m in range(self.m_range[0], self.m_range[1] + 1):
                if j > m:
                    continue
                for n in range(self.n_range[0], self.n_range[1] + 1):
                    yield ParityCode(n, m, j)

    @property
    def size(self) -> int:
        return sum(1 for _ in self.codes()) * len(self.l0_grid())


def reference_search_space(eta0: float) -> SearchSpace:
    """Search ranges used for the two in-station efficiencies 0.98 and 0.93."""
    if math.isclose(eta0, 0.98):
        return SearchSpace((0, 1, 2), (5, 8), (15, 29), (1.0, 1.8))
    if math.isclose(eta0, 0.93):
        return SearchSpace((0, 1, 2), (6, 11), (45, 90), (1.0, 1.8))
    raise DomainError(f"no reference search space for eta0={eta0!r}")


@dataclass
class OptimizerResult:
    code: ParityCode
    link: LinkBudget
    performance: CbsmPerformance
    evaluated: int
    feasible: int
    trace: list[dict[str, Any]] | None = field(default=None, repr=False)


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def pnrd_feasible(eta0: float, eta_l0: float) -> bool:
    """No-cloning bound for photon-counting BSMs: ``eta0 * eta_l0 > 1/2``."""
    return eta0 * eta_l0 > PNRD_BOUND


def elementary_success(
    link: LinkBudget,
    code: ParityCode,
    squeezing: SqueezingSpec,
    clip: ClipPolicy = NO_CLIP,
    detector: Detector | str = Detector.HOMODYNE_CLIP,
) -> float:
    """Per-block success ``P_s``; the clipping factor uses variance ``2 * var``."""
    if Detector(detector) is Detector.PNRD or clip.mu_up == 0.0 or code.j == 0:
        clip_factor = 1.0
    else:
        clip_factor = clip_success(2.0 * squeezing.variance, clip) ** code.j
    return clip_factor * link.eta_prod ** code.m


def letter_failure(eta_prod: float, code: ParityCode) -> float:
    """Block failure ``sum_{k=m-j}^{m} (1/2)^(m-k) (1-eta)^k``, taken literally."""
    eta_prod = _check_prob("eta_prod", eta_prod)
    q = 1.0 - eta_prod
    m, j = code.m, code.j
    total = math.fsum(0.5 ** (m - k) * q**k for k in range(m - j, m + 1))
    if total > 1.0:
        raise OutOfRangeError(
            f"letter-failure sum {total!r} exceeds 1 for eta_prod={eta_prod!r}, m={m}, j={j}"
        )
    return total


def cbsm_success(p_s: float, p_f: float, n: int) -> float:
    """``(1 - p_f)^n - (1 - p_s - p_f)^n``."""
    p_s = _check_prob("p_s", p_s)
    p_f = _check_prob("p_f", p_f)
    if p_s + p_f > 1.0 + 1e-15:
        raise DomainError(f"p_s + p_f must not exceed 1, got {p_s + p_f!r}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    rest = max(0.0, 1.0 - p_s - p_f)
    return min(1.0, max(0.0, (1.0 - p_f) ** n - rest**n))


def hop_count(total_km: float, l0_km: float) -> float:
    """``L / l0``, with distances shorter than one link counted as a single hop."""
    if not (l0_km > 0.0):
        raise DomainError(f"l0_km must be positive, got {l0_km!r}")
    if not (total_km >= 0.0):
        raise DomainError(f"total_km must be non-negative, got {total_km!r}")
    return max(1.0, total_km / l0_km)


def end_to_end(p_link: float, total_km: float, l0_km: float) -> float:
    p_link = _check_prob("p_link", p_link)
    return p_link ** hop_count(total_km, l0_km)


def resource_cost(code: ParityCode, rate: float, total_km: float, l0_km: float) -> float:
    """Average number of qubits per delivered logical qubit, ``2 n m / rate * L / l0``."""
    if not (0.0 < rate <= 1.0):
        raise DomainError(f"rate must lie in (0, 1], got {rate!r}")
    return 2.0 * code.n * code.m / rate * hop_count(total_km, l0_km)


def logical_error(
    squeezing: SqueezingSpec, m: int, clip: ClipPolicy = NO_CLIP, noisy: bool = True
) -> float:
    """Logical X (= Z) error of one block of ``m`` physical BSMs.

    Each physical BSM reads two quadrature syndromes, each wrong with the
    (clipped) conditional bit-error probability at variance ``2 var`` (``noisy``)
    or ``var``; the ``m`` physical results compose independently.
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m!r}")
    v = (2.0 if noisy else 1.0) * squeezing.variance
    e1 = clip_conditional_error(v, clip)
    # 1 - (1 - e1)^(2m), through log1p to survive e1 ~ 1e-7
    return -math.expm1(2 * m * math.log1p(-e1))


def evaluate(
    code: ParityCode,
    link: LinkBudget,
    total_km: float,
    squeezing: SqueezingSpec,
    clip: ClipPolicy = NO_CLIP,
    detector: Detector | str = Detector.HOMODYNE_CLIP,
) -> CbsmPerformance:
    detector = Detector(detector)
    if detector is Detector.PNRD and not pnrd_feasible(link.eta0, link.eta_l0):
        raise InfeasiblePNRDError(
            f"eta0*eta_l0 = {link.eta_prod:.6g} does not exceed the no-cloning bound {PNRD_BOUND}"
        )
    p_s = elementary_success(link, code, squeezing, clip, detector)
    p_f = letter_failure(link.eta_prod, code)
    p_link = cbsm_success(p_s, p_f, code.n)
    rate = end_to_end(p_link, total_km, link.l0_km)
    rc = resource_cost(code, rate, total_km, link.l0_km) if rate > 0.0 else math.inf
    if detector is Detector.PNRD:
        e_logical = logical_error(squeezing, code.m, NO_CLIP, noisy=False)
    else:
        e_logical = logical_error(squeezing, code.m, clip, noisy=True)
    return CbsmPerformance(p_s=p_s, p_f=p_f, p_link=p_link, rate=rate, rc=rc, e_logical=e_logical)


def _sort_key(rc: float, code: ParityCode, l0: float) -> tuple:
    return (rc, code.n, code.m, code.j, l0)


def _scan_l0(args: tuple) -> tuple[int, int, tuple | None, list[dict[str, Any]] | None]:
    l0, codes, total_km, eta0, fiber, psuc, detector, want_trace = args
    link = LinkBudget(eta0, l0, fiber)
    if detector is Detector.PNRD and not pnrd_feasible(link.eta0, link.eta_l0):
        trace = None
        if want_trace:
            trace = [
                {"n": c.n, "m": c.m, "j": c.j, "l0_km": l0, "feasible": False, "rc": None}
                for c in codes
            ]
        return len(codes), 0, None, trace
    hops = hop_count(total_km, l0)
    eta = link.eta_prod
    best = None
    feasible = 0
    trace = [] if want_trace else None
    pf_cache: dict[tuple[int, int], tuple[float, float] | None] = {}
    for code in codes:
        key = (code.m, code.j)
        if key not in pf_cache:
            try:
                p_f = letter_failure(eta, code)
            except OutOfRangeError:
                pf_cache[key] = None
            else:
                p_s = (psuc**code.j if detector is Detector.HOMODYNE_CLIP else 1.0) * eta**code.m
                pf_cache[key] = (p_s, p_f) if p_s + p_f <= 1.0 else None
        cached = pf_cache[key]
        rc = None
        rate = None
        if cached is not None:
            p_link = cbsm_success(cached[0], cached[1], code.n)
            rate = p_link**hops
            if rate > 0.0:
                rc = 2.0 * code.n * code.m / rate * hops
        if rc is not None:
            feasible += 1
            cand = _sort_key(rc, code, l0)
            if best is None or cand < best:
                best = cand
        if trace is not None:
            trace.append(
                {"n": code.n, "m": code.m, "j": code.j, "l0_km": l0, "feasible": rc is not None,
                 "rate": rate, "rc": rc}
            )
    return len(codes), feasible, best, trace


def optimize(
    space: SearchSpace,
    total_km: float,
    eta0: float,
    squeezing: SqueezingSpec,
    clip: ClipPolicy = NO_CLIP,
    detector: Detector | str = Detector.HOMODYNE_CLIP,
    fiber: FiberSpec = DEFAULT_FIBER,
    trace: bool = False,
    workers: int | None = None,
) -> OptimizerResult:
    """Exhaustive grid search for the minimum resource cost.

    Ties are broken by ``(rc, n, m, j, l0)``, so the result does not depend on
    enumeration order or worker count.
    """
    detector = Detector(detector)
    codes = list(space.codes())
    if not codes:
        raise EmptyFeasibleSetError("search space contains no valid (n, m, j)")
    psuc = 1.0
    if detector is Detector.HOMODYNE_CLIP and clip.mu_up > 0.0:
        psuc = clip_success(2.0 * squeezing.variance, clip)
    tasks = [(l0, codes, total_km, eta0, fiber, psuc, detector, trace) for l0 in space.l0_grid()]
    parts = ordered_map(_scan_l0, tasks, workers)

    evaluated = sum(p[0] for p in parts)
    feasible = sum(p[1] for p in parts)
    candidates = [p[2] for p in parts if p[2] is not None]
    if not candidates:
        raise EmptyFeasibleSetError(
            f"no feasible point among {evaluated} evaluated (detector={detector.value})"
        )
    _, n, m, j, l0 = min(candidates)
    code = ParityCode(n, m, j)
    link = LinkBudget(eta0, l0, fiber)
    perf = evaluate(code, link, total_km, squeezing, clip, detector)
    full_trace = list(itertools.chain.from_iterable(p[3] for p in parts)) if trace else None
    return OptimizerResult(code, link, perf, evaluated, feasible, full_trace)


def result_to_dict(
    code: ParityCode,
    link: LinkBudget,
    performance: CbsmPerformance,
    *,
    detector: Detector | str,
    squeezing: SqueezingSpec,
    clip: ClipPolicy,
    total_km: float,
) -> dict[str, Any]:
    """JSON shape ``{params, performance, meta}`` for one evaluated point."""
    return {
        "params": {"n": code.n, "m": code.m, "j": code.j, "l0_km": link.l0_km},
        "performance": asdict(performance),
        "meta": {
            "detector": Detector(detector).value,
            "squeezing_db": squeezing.db,
            "mu_up": clip.mu_up,
            "eta0": link.eta0,
            "total_km": float(total_km),
        },
    }

