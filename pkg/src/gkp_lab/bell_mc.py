"""CBSM decision logic, exhaustive lossless checks, and Monte Carlo shift sampling.

Physical BSMs read two homodyne syndromes: the q-sum fixes the Bell letter
(phi / psi) and the p-difference fixes the sign (+ / -).  Each syndrome is
binned on the ``sqrt(pi)`` lattice with the same clipping windows as
:mod:`gkp_lab.gkp_stats`, so every Monte Carlo frequency here has an analytic
counterpart there or in :mod:`gkp_lab.cbsm_code`.

Decoding rules:

* block: sign by majority over the available physical signs (a tie gives no
  sign); letter from the parity of the psi count, known only if every physical
  BSM delivered a letter.
* logical: sign from the parity of minus-signed blocks (needs every block's
  sign); letter by majority over blocks that delivered one (a tie, or no
  letters, fails).
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._parallel import ordered_map
from .errors import DomainError, InconsistentOutcomeError
from .gkp_stats import NO_CLIP, SQRT_PI, ClipPolicy
from .rng import DEFAULT_CHUNK, check_seed, chunks, stream

GEC_MODULUS = math.sqrt(math.pi / 2.0)


class Letter(enum.IntEnum):
    PHI = 0
    PSI = 1


class Sign(enum.IntEnum):
    PLUS = 0
    MINUS = 1


@dataclass(frozen=True)
class BellLabel:
    letter: Letter
    sign: Sign

    def __str__(self) -> str:
        return f"{self.letter.name.lower()}{'+' if self.sign is Sign.PLUS else '-'}"

    @classmethod
    def parse(cls, text: str) -> "BellLabel":
        text = text.strip().lower()
        table = {str(b): b for b in ALL_LABELS}
        table.update({s.replace("+", "_plus").replace("-", "_minus"): b for s, b in table.items()})
        try:
            return table[text]
        except KeyError:
            raise ValueError(f"unknown Bell label {text!r}; expected one of {sorted(table)}") from None


PHI_PLUS = BellLabel(Letter.PHI, Sign.PLUS)
PHI_MINUS = BellLabel(Letter.PHI, Sign.MINUS)
PSI_PLUS = BellLabel(Letter.PSI, Sign.PLUS)
PSI_MINUS = BellLabel(Letter.PSI, Sign.MINUS)
ALL_LABELS = (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS)


class ParityClass(enum.Enum):
    ZERO = "0"
    EVEN = "even"
    ODD = "odd"


class Kind(enum.Enum):
    FULL = "full"
    SIGN_ONLY = "sign_only"
    FAIL = "fail"


class ErrorClass(enum.IntEnum):
    SUCCESS = 0
    X = 1
    Z = 2
    Y = 3
    FAIL = 4


@dataclass(frozen=True)
class PhysicalOutcome:
    kind: Kind
    label: BellLabel | None = None
    sign_value: Sign | None = None

    @property
    def sign(self) -> Sign | None:
        return self.label.sign if self.label is not None else self.sign_value

    @property
    def letter(self) -> Letter | None:
        return self.label.letter if self.label is not None else None

    @classmethod
    def full(cls, label: BellLabel) -> "PhysicalOutcome":
        return cls(Kind.FULL, label)

    @classmethod
    def sign_only(cls, sign: Sign) -> "PhysicalOutcome":
        return cls(Kind.SIGN_ONLY, None, Sign(sign))


PHYSICAL_FAIL = PhysicalOutcome(Kind.FAIL)


@dataclass(frozen=True)
class BlockOutcome:
    """Result of one block BSM; ``SIGN_ONLY`` blocks still feed the logical sign."""

    kind: Kind
    label: BellLabel | None = None
    sign_value: Sign | None = None
    contributing: int = 0

    @property
    def sign(self) -> Sign | None:
        return self.label.sign if self.label is not None else self.sign_value

    @property
    def letter(self) -> Letter | None:
        return self.label.letter if self.label is not None else None


@dataclass(frozen=True)
class LogicalOutcome:
    kind: Kind
    label: BellLabel | None = None
    contributing: int = 0


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "Estimate":
        if trials < 1:
            return cls(math.nan, math.nan, trials)
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials)

    def z(self, reference: float) -> float:
        """Standard score of ``reference`` against this estimate."""
        diff = self.mean - reference
        if self.stderr > 0.0:
            return diff / self.stderr
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)


# ---------------------------------------------------------------------------
# exact decision logic


_CLASSIFY = {
    (ParityClass.EVEN, ParityClass.ZERO): PHI_PLUS,
    (ParityClass.ODD, ParityClass.ZERO): PHI_MINUS,
    (ParityClass.ZERO, ParityClass.EVEN): PSI_PLUS,
    (ParityClass.ZERO, ParityClass.ODD): PSI_MINUS,
}


def classify_physical(q_sum_parity_bin: ParityClass, p_diff_parity_bin: ParityClass) -> BellLabel:
    """Bell label from the pair of binned homodyne parity classes."""
    key = (ParityClass(q_sum_parity_bin), ParityClass(p_diff_parity_bin))
    try:
        return _CLASSIFY[key]
    except KeyError:
        raise InconsistentOutcomeError(
            f"outcome ({key[0].value}, {key[1].value}) does not identify a Bell state"
        ) from None


def parity_classes(label: BellLabel) -> tuple[ParityClass, ParityClass]:
    """Inverse of :func:`classify_physical`."""
    parity = ParityClass.EVEN if label.sign is Sign.PLUS else ParityClass.ODD
    if label.letter is Letter.PHI:
        return parity, ParityClass.ZERO
    return ParityClass.ZERO, parity


def _majority_sign(signs: Iterable[Sign]) -> Sign | None:
    counts = Counter(signs)
    plus, minus = counts[Sign.PLUS], counts[Sign.MINUS]
    if plus == minus:
        return None
    return Sign.PLUS if plus > minus else Sign.MINUS


def decode_block(outcomes: Sequence[PhysicalOutcome]) -> BlockOutcome:
    if not outcomes:
        raise DomainError("a block needs at least one physical outcome")
    contributing = sum(o.kind is not Kind.FAIL for o in outcomes)
    sign = _majority_sign(o.sign for o in outcomes if o.sign is not None)
    if sign is None:
        # no signs, or a split vote
        return BlockOutcome(Kind.FAIL, contributing=contributing)
    if all(o.kind is Kind.FULL for o in outcomes):
        psi = sum(o.letter is Letter.PSI for o in outcomes)
        return BlockOutcome(Kind.FULL, BellLabel(Letter(psi % 2), sign), contributing=contributing)
    return BlockOutcome(Kind.SIGN_ONLY, sign_value=sign, contributing=contributing)


def decode_logical(blocks: Sequence[BlockOutcome]) -> LogicalOutcome:
    if not blocks:
        raise DomainError("a logical BSM needs at least one block")
    letters = [b.letter for b in blocks if b.kind is Kind.FULL]
    contributing = len(letters)
    if any(b.sign is None for b in blocks):
        return LogicalOutcome(Kind.FAIL, contributing=contributing)
    phi = letters.count(Letter.PHI)
    psi = letters.count(Letter.PSI)
    if phi == psi:
        return LogicalOutcome(Kind.FAIL, contributing=contributing)
    minus = sum(b.sign is Sign.MINUS for b in blocks)
    label = BellLabel(Letter.PHI if phi > psi else Letter.PSI, Sign(minus % 2))
    return LogicalOutcome(Kind.FULL, label, contributing=contributing)


# ---------------------------------------------------------------------------
# lossless enumeration of the Bell-state decompositions


def block_branches(label: BellLabel, m: int) -> list[tuple[BellLabel, ...]]:
    """Physical labels in the decomposition of a block Bell state.

    All share the block sign; the psi count is even for phi and odd for psi.
    """
    out = []
    for letters in itertools.product((Letter.PHI, Letter.PSI), repeat=m):
        if sum(letters) % 2 == label.letter:
            out.append(tuple(BellLabel(x, label.sign) for x in letters))
    return out


def logical_branches(label: BellLabel, n: int) -> list[tuple[BellLabel, ...]]:
    """Block labels in the decomposition of a logical Bell state.

    All share the logical letter; the minus count is even for + and odd for -.
    """
    out = []
    for signs in itertools.product((Sign.PLUS, Sign.MINUS), repeat=n):
        if sum(signs) % 2 == label.sign:
            out.append(tuple(BellLabel(label.letter, s) for s in signs))
    return out


@dataclass(frozen=True)
class EnumerationReport:
    n: int
    m: int
    label: BellLabel
    branches: int
    recovered: int
    failures: int
    misidentifications: int
    exhaustive: bool

    @property
    def deterministic(self) -> bool:
        return self.failures == 0 and self.misidentifications == 0 and self.recovered == self.branches


_BRUTE_FORCE_LIMIT = 1 << 16


def enumerate_lossless(n: int, m: int, label: BellLabel) -> EnumerationReport:
    """Decode every branch of the lossless decomposition of ``label``.

    Small codes are checked branch by branch.  Larger ones are counted exactly
    by decoding every block branch once and combining the resulting outcome
    multisets, which is equivalent because each block decodes independently.
    """
    if not (1 <= n <= 6 and 1 <= m <= 6):
        raise DomainError(f"enumeration supports 1 <= n, m <= 6, got n={n}, m={m}")
    per_block = 2 ** (m - 1)
    total = 2 ** (n - 1) * per_block**n
    tally: Counter = Counter()

    if total <= _BRUTE_FORCE_LIMIT:
        for blocks in logical_branches(label, n):
            for phys in itertools.product(*(block_branches(b, m) for b in blocks)):
                decoded = [decode_block([PhysicalOutcome.full(x) for x in p]) for p in phys]
                tally[_score(decode_logical(decoded), label)] += 1
        exhaustive = True
    else:
        dist: dict[BellLabel, Counter] = {}
        for b in ALL_LABELS:
            dist[b] = Counter(
                decode_block([PhysicalOutcome.full(x) for x in p]) for p in block_branches(b, m)
            )
        for blocks in logical_branches(label, n):
            for combo in itertools.product(*(dist[b].items() for b in blocks)):
                weight = math.prod(c for _, c in combo)
                tally[_score(decode_logical([o for o, _ in combo]), label)] += weight
        exhaustive = False

    assert sum(tally.values()) == total
    return EnumerationReport(
        n=n,
        m=m,
        label=label,
        branches=total,
        recovered=tally["ok"],
        failures=tally["fail"],
        misidentifications=tally["wrong"],
        exhaustive=exhaustive,
    )


def _score(outcome: LogicalOutcome, truth: BellLabel) -> str:
    if outcome.kind is not Kind.FULL:
        return "fail"
    return "ok" if outcome.label == truth else "wrong"


# ---------------------------------------------------------------------------
# shift sampling


def bin_shift(delta: np.ndarray, half_width: float) -> np.ndarray:
    """Bin shifts on the ``sqrt(pi)`` lattice: 0 = correct, 1 = flipped, -1 = clipped."""
    delta = np.asarray(delta, dtype=float)
    k = np.rint(delta / SQRT_PI)
    dist = np.abs(delta - k * SQRT_PI)
    flag = (k.astype(np.int64) & 1).astype(np.int8)
    return np.where(dist > half_width, np.int8(-1), flag)


@dataclass
class PhysicalBatch:
    """Raw per-syndrome flags of a batch of physical BSMs (0 ok, 1 flipped, -1 clipped/lost)."""

    letter_flag: np.ndarray
    sign_flag: np.ndarray
    survived: np.ndarray

    def error_class(self) -> np.ndarray:
        ok = self.survived & (self.letter_flag >= 0) & (self.sign_flag >= 0)
        code = self.letter_flag.astype(np.int8) + 2 * self.sign_flag.astype(np.int8)
        return np.where(ok, code, np.int8(ErrorClass.FAIL)).astype(np.int8)

    def sign_only(self) -> np.ndarray:
        return self.survived & (self.letter_flag < 0) & (self.sign_flag >= 0)


def sample_physical_batch(
    rng: np.random.Generator,
    variance: float,
    clip: ClipPolicy = NO_CLIP,
    size: int | tuple[int, ...] = 1,
    eta_prod: float = 1.0,
) -> PhysicalBatch:
    """Draw ``size`` physical BSMs with syndrome variance ``variance`` and loss ``1 - eta_prod``."""
    if not (variance >= 0.0):
        raise DomainError(f"syndrome variance must be non-negative, got {variance!r}")
    if not (0.0 <= eta_prod <= 1.0):
        raise DomainError(f"eta_prod must lie in [0, 1], got {eta_prod!r}")
    sd = math.sqrt(variance)
    w = clip.half_width
    letter = bin_shift(rng.normal(0.0, sd, size), w)
    sign = bin_shift(rng.normal(0.0, sd, size), w)
    if eta_prod < 1.0:
        survived = rng.random(size) < eta_prod
    else:
        survived = np.ones(size, dtype=bool)
    return PhysicalBatch(letter, sign, survived)


def sample_physical_bsm(
    rng: np.random.Generator,
    variance: float,
    clip: ClipPolicy = NO_CLIP,
    truth: BellLabel = PHI_PLUS,
    eta_prod: float = 1.0,
) -> tuple[PhysicalOutcome, ErrorClass]:
    """One physical BSM on Bell state ``truth``.

    ``variance`` is the syndrome variance, i.e. the sum of both input modes'
    shift variances.  A clipped letter syndrome leaves a sign-only outcome; a
    clipped sign syndrome or a lost mode is a failure.
    """
    batch = sample_physical_batch(rng, variance, clip, 1, eta_prod)
    lf, sf, alive = int(batch.letter_flag[0]), int(batch.sign_flag[0]), bool(batch.survived[0])
    if not alive or sf < 0:
        return PHYSICAL_FAIL, ErrorClass.FAIL
    sign = Sign(truth.sign ^ sf)
    if lf < 0:
        return PhysicalOutcome.sign_only(sign), ErrorClass.FAIL
    seen = BellLabel(Letter(truth.letter ^ lf), sign)
    label = classify_physical(*parity_classes(seen))
    return PhysicalOutcome.full(label), ErrorClass(lf + 2 * sf)


def simulate_gec_shift(
    rng: np.random.Generator, ancilla_variance: float, size: int | None = None
):
    """Residual ``(q, p)`` shift after teleportation GEC with noisy ancillae.

    The two ancilla shifts are mixed on a balanced beam splitter; the measured
    combination is reduced modulo ``sqrt(pi/2)`` and rescaled by ``sqrt(2)``.
    """
    if not (ancilla_variance >= 0.0):
        raise DomainError(f"ancilla variance must be non-negative, got {ancilla_variance!r}")
    sd = math.sqrt(ancilla_variance)
    shape = (2,) if size is None else (2, size)
    s2 = rng.normal(0.0, sd, shape)
    s3 = rng.normal(0.0, sd, shape)
    plus = (s2 + s3) / math.sqrt(2.0)
    minus = (s2 - s3) / math.sqrt(2.0)
    measured = (plus - minus) / math.sqrt(2.0)
    wrapped = measured - GEC_MODULUS * np.rint(measured / GEC_MODULUS)
    residual = math.sqrt(2.0) * wrapped
    if size is None:
        return float(residual[0]), float(residual[1])
    return residual[0], residual[1]


def wrapped_residual_variance(ancilla_variance: float, terms: int = 8) -> float:
    """Exact variance of the residual returned by :func:`simulate_gec_shift`.

    Equals ``2 * ancilla_variance`` up to the (tiny) effect of the modular
    reduction.
    """
    if not (ancilla_variance > 0.0):
        raise DomainError("ancilla variance must be positive")
    sd = math.sqrt(ancilla_variance)
    half = GEC_MODULUS / 2.0
    total = 0.0
    for k in range(-terms, terms + 1):
        # E[(x - c)^2 ; x in [c - half, c + half]] for x ~ N(0, sd^2), c = k * modulus
        c = k * GEC_MODULUS
        a, b = (c - half) / sd, (c + half) / sd
        m0 = 0.5 * (math.erf(b / math.sqrt(2.0)) - math.erf(a / math.sqrt(2.0)))
        pa = math.exp(-a * a / 2.0) / math.sqrt(2.0 * math.pi)
        pb = math.exp(-b * b / 2.0) / math.sqrt(2.0 * math.pi)
        m1 = pa - pb
        m2 = m0 + a * pa - b * pb
        total += sd * sd * m2 - 2.0 * c * sd * m1 + c * c * m0
    return 2.0 * total


# ---------------------------------------------------------------------------
# chunked Monte Carlo drivers


def _check_trials(trials: int, minimum: int = 1) -> int:
    if int(trials) != trials or trials < minimum:
        raise DomainError(f"trials must be an integer >= {minimum}, got {trials!r}")
    return int(trials)


@dataclass(frozen=True)
class ClipEstimate:
    success: Estimate
    conditional_error: Estimate
    correct: Estimate
    incorrect: Estimate


def estimate_clip(
    variance: float,
    clip: ClipPolicy,
    trials: int,
    seed: int,
    workers: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> ClipEstimate:
    """Empirical clipping statistics of a single syndrome of variance ``variance``."""
    trials = _check_trials(trials)
    seed = check_seed(seed)

    def run(chunk: tuple[int, int]) -> tuple[int, int]:
        index, size = chunk
        flags = bin_shift(stream(seed, index).normal(0.0, math.sqrt(variance), size), clip.half_width)
        return int(np.count_nonzero(flags == 0)), int(np.count_nonzero(flags == 1))

    parts = ordered_map(run, chunks(trials, chunk_size), workers)
    correct = sum(p[0] for p in parts)
    incorrect = sum(p[1] for p in parts)
    kept = correct + incorrect
    return ClipEstimate(
        success=Estimate.from_counts(kept, trials),
        conditional_error=Estimate.from_counts(incorrect, kept),
        correct=Estimate.from_counts(correct, trials),
        incorrect=Estimate.from_counts(incorrect, trials),
    )


@dataclass(frozen=True)
class PhysicalEstimate:
    counts: dict[str, int]
    sign_only: int
    trials: int
    letter_kept: int
    letter_flipped: int

    def frequency(self, name: str) -> Estimate:
        return Estimate.from_counts(self.counts[name], self.trials)

    @property
    def letter_success(self) -> Estimate:
        return Estimate.from_counts(self.letter_kept, self.trials)

    @property
    def letter_conditional_error(self) -> Estimate:
        return Estimate.from_counts(self.letter_flipped, self.letter_kept)


def estimate_physical_bsm(
    variance: float,
    clip: ClipPolicy,
    trials: int,
    seed: int,
    eta_prod: float = 1.0,
    workers: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> PhysicalEstimate:
    """Tally the outcome taxonomy (success, X, Z, Y, fail) of physical BSMs."""
    trials = _check_trials(trials)
    seed = check_seed(seed)

    def run(chunk: tuple[int, int]) -> np.ndarray:
        index, size = chunk
        batch = sample_physical_batch(stream(seed, index), variance, clip, size, eta_prod)
        classes = np.bincount(batch.error_class(), minlength=5)
        letter = batch.letter_flag[batch.survived]
        extra = [
            np.count_nonzero(batch.sign_only()),
            np.count_nonzero(letter >= 0),
            np.count_nonzero(letter == 1),
        ]
        return np.concatenate([classes, extra]).astype(np.int64)

    total = np.sum(ordered_map(run, chunks(trials, chunk_size), workers), axis=0)
    names = [c.name.lower() for c in ErrorClass]
    return PhysicalEstimate(
        counts={name: int(total[i]) for i, name in enumerate(names)},
        sign_only=int(total[5]),
        trials=trials,
        letter_kept=int(total[6]),
        letter_flipped=int(total[7]),
    )


@dataclass(frozen=True)
class GecEstimate:
    residual_variance: float
    stderr: float
    trials: int
    skewness: float
    skewness_stderr: float


def estimate_gec(
    ancilla_variance: float,
    trials: int,
    seed: int,
    workers: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> GecEstimate:
    """Empirical variance and skewness of the q-quadrature GEC residual shift."""
    trials = _check_trials(trials, minimum=2)
    seed = check_seed(seed)

    def run(chunk: tuple[int, int]) -> np.ndarray:
        index, size = chunk
        q, _ = simulate_gec_shift(stream(seed, index), ancilla_variance, size)
        q2 = q * q
        return np.array([q2.sum(), (q2 * q).sum(), (q2 * q2).sum(), (q2 * q2 * q2).sum()])

    s2, s3, s4, s6 = np.sum(ordered_map(run, chunks(trials, chunk_size), workers), axis=0)
    n = trials
    # zero-mean by symmetry: variance estimated by the raw second moment
    var = s2 / n
    var_sd = math.sqrt(max(s4 / n - var * var, 0.0) / n)
    # raw-moment skewness and its delta-method standard error
    skew = (s3 / n) / var**1.5 if var > 0.0 else 0.0
    skew_sd = math.sqrt(max(s6 / n - (s3 / n) ** 2, 0.0) / n) / var**1.5 if var > 0.0 else 0.0
    return GecEstimate(
        residual_variance=float(var),
        stderr=var_sd,
        trials=n,
        skewness=float(skew),
        skewness_stderr=skew_sd,
    )


@dataclass(frozen=True)
class LinkEstimate:
    success: Estimate
    correct: int
    misidentified: int
    failed: int


def _link_chunk(
    rng: np.random.Generator,
    size: int,
    n: int,
    m: int,
    eta_prod: float,
    variance: float,
    clip: ClipPolicy,
    truth: BellLabel,
) -> tuple[int, int, int]:
    # sample decomposition branches uniformly, consistent with the logical truth
    bsign = rng.integers(0, 2, (size, n), dtype=np.int8)
    bsign[:, -1] = (truth.sign - bsign[:, :-1].sum(axis=1)) % 2
    pletter = rng.integers(0, 2, (size, n, m), dtype=np.int8)
    pletter[:, :, -1] = (truth.letter - pletter[:, :, :-1].sum(axis=2)) % 2
    psign = np.broadcast_to(bsign[:, :, None], (size, n, m))

    batch = sample_physical_batch(rng, variance, clip, (size, n, m), eta_prod)
    alive = batch.survived & (batch.sign_flag >= 0)
    sign = np.where(alive, psign ^ batch.sign_flag, -1)
    letter = np.where(alive & (batch.letter_flag >= 0), pletter ^ batch.letter_flag, -1)
    lletter, lsign = decode_arrays(letter, sign)
    ok = lletter >= 0
    succeeded = int(np.count_nonzero(ok))
    correct = int(np.count_nonzero(ok & (lletter == truth.letter) & (lsign == truth.sign)))
    return succeeded, correct, size - succeeded


def decode_arrays(letter: np.ndarray, sign: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logical ``(letter, sign)`` codes (-1 on failure) for ``(trials, n, m)`` arrays.

    Array form of :func:`decode_block` followed by :func:`decode_logical`.
    """
    letter = np.asarray(letter, dtype=np.int8)
    sign = np.asarray(sign, dtype=np.int8)
    plus = np.count_nonzero(sign == 0, axis=2)
    minus = np.count_nonzero(sign == 1, axis=2)
    bsign = np.where(plus > minus, 0, np.where(minus > plus, 1, -1))
    known = np.all(letter >= 0, axis=2) & (bsign >= 0)
    bletter = np.where(known, np.count_nonzero(letter == 1, axis=2) % 2, -1)
    signed = np.all(bsign >= 0, axis=1)
    phi = np.count_nonzero(bletter == 0, axis=1)
    psi = np.count_nonzero(bletter == 1, axis=1)
    lletter = np.where(phi > psi, 0, np.where(psi > phi, 1, -1))
    ok = signed & (lletter >= 0)
    lsign = np.count_nonzero(bsign == 1, axis=1) % 2
    return np.where(ok, lletter, -1), np.where(ok, lsign, -1)


def estimate_link(
    n: int,
    m: int,
    eta_prod: float,
    trials: int,
    seed: int,
    variance: float = 0.0,
    clip: ClipPolicy = NO_CLIP,
    truth: BellLabel = PHI_PLUS,
    workers: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> LinkEstimate:
    """Empirical CBSM success probability for an ``(n, m)`` code.

    Every physical BSM survives loss independently with probability
    ``eta_prod`` and reads syndromes of variance ``variance``.
    """
    trials = _check_trials(trials, minimum=10_000)
    seed = check_seed(seed)
    if n < 1 or m < 1:
        raise DomainError(f"n and m must be >= 1, got n={n}, m={m}")

    def run(chunk: tuple[int, int]) -> tuple[int, int, int]:
        index, size = chunk
        return _link_chunk(stream(seed, index), size, n, m, eta_prod, variance, clip, truth)

    parts = ordered_map(run, chunks(trials, chunk_size), workers)
    succeeded = sum(p[0] for p in parts)
    correct = sum(p[1] for p in parts)
    failed = sum(p[2] for p in parts)
    return LinkEstimate(
        success=Estimate.from_counts(succeeded, trials),
        correct=correct,
        misidentified=succeeded - correct,
        failed=failed,
    )
