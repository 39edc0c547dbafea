"""Pairwise exchange of single propositions for placeholder units."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kernel import classify
from .network import AgentState
from .valuation import ACCEPTED, full_gate, perceived_range

INSUFFICIENT_BALANCE = "insufficient_balance"

TRACE_COLUMNS = (
    "tick", "market", "buyer", "seller", "object", "kind", "price",
    "gain_buyer_pct", "gain_seller_pct", "minted", "imitation", "reason",
)


@dataclass(frozen=True)
class Proposition:
    id: str
    stimulus: tuple[float, ...]
    base_value: float
    kind: str = "singleton"

    def __post_init__(self):
        if not (math.isfinite(self.base_value) and self.base_value > 0):
            raise ValueError(f"base_value must be finite and positive, got {self.base_value}")
        if self.kind not in ("singleton", "linked"):
            raise ValueError(f"unknown proposition kind {self.kind!r}")
        if not all(math.isfinite(x) for x in self.stimulus):
            raise ValueError("stimulus coordinates must be finite")


@dataclass(frozen=True)
class Offer:
    seller_id: int
    proposition_id: str
    ask: float


@dataclass(frozen=True)
class TransactionRecord:
    tick: int
    market: str
    buyer_id: int
    seller_id: int
    object_ref: str
    kind: str
    price: float
    gain_buyer_pct: float
    gain_seller_pct: float
    minted: float
    imitation: bool
    reason: str

    def to_row(self) -> list[str]:
        return [
            str(self.tick), self.market, str(self.buyer_id), str(self.seller_id),
            self.object_ref, self.kind, repr(float(self.price)),
            repr(float(self.gain_buyer_pct)), repr(float(self.gain_seller_pct)),
            repr(float(self.minted)), "1" if self.imitation else "0", self.reason,
        ]

    @classmethod
    def from_row(cls, row) -> "TransactionRecord":
        if len(row) != len(TRACE_COLUMNS):
            raise ValueError(f"expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        imitation = row[10]
        if imitation not in ("0", "1"):
            raise ValueError(f"bad imitation flag {imitation!r}")
        return cls(
            int(row[0]), row[1], int(row[2]), int(row[3]), row[4], row[5],
            float(row[6]), float(row[7]), float(row[8]), float(row[9]),
            imitation == "1", row[11],
        )


def net_gain(perceived_value: float, price: float) -> float:
    """Percent gain of holding something worth ``perceived_value`` bought at ``price``."""
    if price == 0:
        return 0.0
    return 100.0 * (perceived_value - price) / price


def perceived_value(agent: AgentState, proposition) -> float:
    """Point estimate: centre of the agent's acceptable range."""
    return proposition.base_value * classify(agent.kernel, proposition.stimulus)


def propose_trade(seller: AgentState, proposition) -> Offer:
    if seller.holdings[proposition.id] < 1:
        raise ValueError(f"agent {seller.id} does not hold {proposition.id}")
    return Offer(seller.id, proposition.id, perceived_value(seller, proposition))


def transfer(seller: AgentState, buyer: AgentState, proposition_id) -> None:
    seller.holdings[proposition_id] -= 1
    if seller.holdings[proposition_id] == 0:
        del seller.holdings[proposition_id]
    buyer.holdings[proposition_id] += 1


def pay(buyer: AgentState, payee: AgentState, price: float, allow_mint: bool) -> float | None:
    """Move ``price`` from buyer to payee; returns the minted shortfall, or
    None when the buyer cannot pay and minting is off."""
    minted = 0.0
    if buyer.balance < price:
        if not allow_mint:
            return None
        minted = price - buyer.balance
        buyer.balance = 0.0
    else:
        buyer.balance -= price
    payee.balance += price
    return minted


def settle_pairwise(
    buyer: AgentState,
    seller: AgentState,
    offer: Offer,
    proposition,
    allow_mint: bool = False,
    *,
    tick: int = 0,
    imitated_price: float | None = None,
    imitated_value: float | None = None,
) -> TransactionRecord:
    """Evaluate an offer and, if accepted, move the proposition and the money.

    Normally the buyer runs the full gate at the ask; the settled price is
    the midpoint of the two parties' interval overlap, else the ask.  An
    imitating buyer (``imitated_price`` given) skips the gate and pays the
    price it observed, valuing the object as its model did
    (``imitated_value``).  Every outcome, accepted or not, is a record.
    """
    if offer.seller_id != seller.id or offer.proposition_id != proposition.id:
        raise ValueError("offer does not match seller/proposition")

    def record(kind, price, gb=0.0, gs=0.0, minted=0.0, reason=ACCEPTED):
        return TransactionRecord(
            tick, "minimal", buyer.id, seller.id, proposition.id, kind, price,
            gb, gs, minted, imitated_price is not None, reason,
        )

    seller_value = perceived_value(seller, proposition)
    if imitated_price is not None:
        price = imitated_price
        buyer_value = imitated_value if imitated_value is not None else perceived_value(buyer, proposition)
    else:
        decision = full_gate(buyer, proposition, offer.ask)
        if not decision.accepted:
            return record("bid", offer.ask, reason=decision.reason)
        both = perceived_range(buyer, proposition).overlap(perceived_range(seller, proposition))
        price = both.center if both is not None else offer.ask
        buyer_value = perceived_value(buyer, proposition)

    minted = pay(buyer, seller, price, allow_mint)
    if minted is None:
        return record("bid", price, reason=INSUFFICIENT_BALANCE)
    transfer(seller, buyer, proposition.id)
    return record(
        "complete", price,
        net_gain(buyer_value, price),
        net_gain(price, seller_value),
        minted,
    )
