"""From genomes and kernels to prices: cipher gate, acceptable range, accept decision."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .genome import ALPHABET, Genome
from .kernel import classify

HASH_FAIL = "hash_fail"
OUT_OF_RANGE = "out_of_range"
ACCEPTED = "accepted"


@dataclass(frozen=True)
class PriceInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi:
            raise ValueError(f"need 0 <= lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2

    def overlap(self, other: "PriceInterval") -> "PriceInterval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return PriceInterval(lo, hi) if lo <= hi else None


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    reason: str

    def __post_init__(self):
        if self.accepted != (self.reason == ACCEPTED):
            raise ValueError(f"inconsistent decision: {self}")


def encode_value(v: int) -> str:
    """Base-26 over a-z, most significant letter first (0 -> 'a', 26 -> 'ba')."""
    if v < 0:
        raise ValueError("only non-negative integers can be encoded")
    digits = []
    while True:
        v, r = divmod(v, 26)
        digits.append(ALPHABET[r])
        if v == 0:
            return "".join(reversed(digits))


def round_price(x: float) -> int:
    """Nearest integer, halves rounded up."""
    return math.floor(x + 0.5)


def hash_gate(g: Genome, v: int) -> bool:
    """True iff the encoded value appears contiguously in the hash genes."""
    return encode_value(v) in g.hash_genes


def acceptable_range(score: float, base_value: float, flexibility: float) -> PriceInterval:
    center = base_value * score
    half = flexibility * center
    return PriceInterval(max(0.0, center - half), center + half)


def eq1_gate(T: PriceInterval, x_j: float) -> GateDecision:
    """Accept iff the offered price lies in the closed acceptable interval."""
    if x_j < 0:
        raise ValueError(f"offered price must be non-negative, got {x_j}")
    if T.lo <= x_j <= T.hi:
        return GateDecision(True, ACCEPTED)
    return GateDecision(False, OUT_OF_RANGE)


def eq1_gate_normalized(T: PriceInterval, x_j: float) -> GateDecision:
    """Same decision via the price-normalised band k = T / x_j (x_j > 0)."""
    if x_j <= 0:
        raise ValueError("normalised form needs a positive price")
    k_lo, k_hi = T.lo / x_j, T.hi / x_j
    if k_lo <= 1.0 <= k_hi:
        return GateDecision(True, ACCEPTED)
    return GateDecision(False, OUT_OF_RANGE)


def perceived_range(agent, item) -> PriceInterval:
    score = classify(agent.kernel, item.stimulus)
    return acceptable_range(score, item.base_value, agent.genome.flexibility_gene)


def full_gate(agent, item, x_j: float) -> GateDecision:
    """Hash gate on the rounded price, then the interval test.

    A zero classification score rejects outright.

    ``agent`` needs ``genome`` and ``kernel``; ``item`` needs ``stimulus``
    and ``base_value``.  The reason names the first stage that failed.
    """
    if x_j < 0:
        raise ValueError(f"offered price must be non-negative, got {x_j}")
    if not hash_gate(agent.genome, round_price(x_j)):
        return GateDecision(False, HASH_FAIL)
    score = classify(agent.kernel, item.stimulus)
    if score == 0.0:
        # [0, 0] stands for "no value assigned", not "worth exactly 0"
        return GateDecision(False, OUT_OF_RANGE)
    return eq1_gate(acceptable_range(score, item.base_value, agent.genome.flexibility_gene), x_j)
