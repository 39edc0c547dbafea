"""One-to-all auctions of linked propositions with acceptance-rate feedback."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .kernel import classify
from .market_minimal import TransactionRecord, net_gain, pay
from .network import AgentState
from .valuation import GateDecision, full_gate

DEFAULT_BAND = (0.2, 0.8)
DEFAULT_DELTA = 0.05
DEFAULT_RELINK_AFTER = 3


@dataclass(frozen=True)
class Ensemble:
    id: str
    operator_id: int
    members: tuple[str, ...]
    offer_price: float
    linkage_factor: float
    stimulus: tuple[float, ...]
    base_value: float
    round: int = 0
    low_streak: int = 0

    def __post_init__(self):
        if len(self.members) < 2 or len(set(self.members)) != len(self.members):
            raise ValueError("an ensemble needs >= 2 distinct members")
        if self.linkage_factor <= 0:
            raise ValueError("linkage_factor must be positive")
        if not self.offer_price >= 0:
            raise ValueError("offer_price must be non-negative")


@dataclass
class AuctionRoundResult:
    ensemble_id: str
    round: int
    decisions: dict[int, GateDecision]
    acceptance_rate: float
    fills: list[int]
    records: list[TransactionRecord] = field(default_factory=list)


def _centroid(props) -> tuple[float, ...]:
    n = len(props[0].stimulus)
    return tuple(sum(p.stimulus[d] for p in props) / len(props) for d in range(n))


def link(operator_id: int, propositions: Sequence, linkage_factor: float = 1.0,
         ensemble_id: str | None = None) -> Ensemble:
    """Bundle propositions; the opening price is linkage times the summed base values."""
    ids = tuple(p.id for p in propositions)
    if len(ids) < 2:
        raise ValueError("an ensemble needs >= 2 propositions")
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate members in {ids}")
    base = sum(p.base_value for p in propositions)
    return Ensemble(
        ensemble_id or "+".join(ids), operator_id, ids, linkage_factor * base,
        linkage_factor, _centroid(propositions), base,
    )


def auction_round(
    ensemble: Ensemble,
    agents: Sequence[AgentState],
    *,
    tick: int = 0,
    allow_mint: bool = False,
) -> AuctionRoundResult:
    """Every agent but the operator evaluates the offer once, in id order.

    Gate-accepting agents buy one share at the offer price, paid to the
    operator; an accepting agent that cannot pay is logged as a bid.  The
    acceptance rate counts gate decisions.
    """
    operator = next((a for a in agents if a.id == ensemble.operator_id), None)
    if operator is None:
        raise ValueError(f"operator {ensemble.operator_id} not among the agents")
    price = ensemble.offer_price
    op_value = ensemble.base_value * classify(operator.kernel, ensemble.stimulus)
    decisions: dict[int, GateDecision] = {}
    fills: list[int] = []
    records: list[TransactionRecord] = []
    for agent in sorted(agents, key=lambda a: a.id):
        if agent.id == operator.id:
            continue
        decision = full_gate(agent, ensemble, price)
        decisions[agent.id] = decision
        if not decision.accepted:
            records.append(TransactionRecord(
                tick, "compositional", agent.id, operator.id, ensemble.id, "bid",
                price, 0.0, 0.0, 0.0, False, decision.reason))
            continue
        minted = pay(agent, operator, price, allow_mint)
        if minted is None:
            records.append(TransactionRecord(
                tick, "compositional", agent.id, operator.id, ensemble.id, "bid",
                price, 0.0, 0.0, 0.0, False, "insufficient_balance"))
            continue
        agent.ensemble_shares[ensemble.id] += 1
        fills.append(agent.id)
        value = ensemble.base_value * classify(agent.kernel, ensemble.stimulus)
        records.append(TransactionRecord(
            tick, "compositional", agent.id, operator.id, ensemble.id, "complete",
            price, net_gain(value, price), net_gain(price, op_value), minted, False,
            decision.reason))
    accepted = sum(d.accepted for d in decisions.values())
    rate = accepted / len(decisions) if decisions else 0.0
    return AuctionRoundResult(ensemble.id, ensemble.round, decisions, rate, fills, records)


def feedback_adjust(
    ensemble: Ensemble,
    result: AuctionRoundResult,
    band: tuple[float, float] = DEFAULT_BAND,
    delta: float = DEFAULT_DELTA,
    *,
    relink_after: int | None = None,
    population: Sequence[AgentState] | None = None,
    catalog: dict | None = None,
) -> Ensemble:
    """Reprice after a round: cut by ``delta`` below the band, raise above it.

    With ``relink_after`` set, ``relink_after`` consecutive below-band
    rounds drop the member the population classifies worst (mean score);
    the price is scaled by the change in summed base value.  Ensembles are
    never cut below two members.
    """
    if result.round != ensemble.round or result.ensemble_id != ensemble.id:
        raise ValueError("result does not belong to this ensemble round")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    lo, hi = band
    price = ensemble.offer_price
    streak = 0
    if result.acceptance_rate < lo:
        price *= 1.0 - delta
        streak = ensemble.low_streak + 1
    elif result.acceptance_rate > hi:
        price *= 1.0 + delta
    adjusted = replace(ensemble, offer_price=price, round=ensemble.round + 1, low_streak=streak)

    if (relink_after and streak >= relink_after and len(ensemble.members) > 2
            and population and catalog is not None):
        adjusted = _drop_weakest(adjusted, population, catalog)
    return adjusted


def _drop_weakest(ensemble: Ensemble, population, catalog) -> Ensemble:
    def mean_score(pid):
        stim = catalog[pid].stimulus
        return sum(classify(a.kernel, stim) for a in population) / len(population)

    # ties go to the earlier member
    weakest = min(ensemble.members, key=mean_score)
    kept = tuple(m for m in ensemble.members if m != weakest)
    props = [catalog[m] for m in kept]
    base = sum(p.base_value for p in props)
    return replace(
        ensemble,
        members=kept,
        stimulus=_centroid(props),
        offer_price=ensemble.offer_price * base / ensemble.base_value,
        base_value=base,
        low_streak=0,
    )


def round_summary_row(tick: int, ensemble: Ensemble, result: AuctionRoundResult) -> list[str]:
    """tick, ensemble_id, round, offer_price, acceptance_rate, n_fills"""
    return [str(tick), ensemble.id, str(result.round), repr(float(ensemble.offer_price)),
            repr(float(result.acceptance_rate)), str(len(result.fills))]
