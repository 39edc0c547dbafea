"""Agent graph: neighbourhoods, arcs, the observation criterion, imitation, mobility."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .genome import Genome, copy_hash_segment
from .kernel import Kernel, alpha_distance, classify

log = logging.getLogger(__name__)

EPS_SC = 0.05


@dataclass
class AgentState:
    id: int
    genome: Genome
    kernel: Kernel
    position: tuple[float, float]
    balance: float = 0.0
    holdings: Counter = field(default_factory=Counter)
    ensemble_shares: Counter = field(default_factory=Counter)

    @property
    def proposition_count(self) -> int:
        return sum(self.holdings.values()) + sum(self.ensemble_shares.values())


@dataclass(frozen=True)
class ArcSet:
    black: frozenset
    red: frozenset


@dataclass(frozen=True)
class ObservationInputs:
    K_x: int
    K_neighbors: tuple[int, ...]
    Sm: float
    Sc: float


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def neighbor_map(population: Sequence[AgentState], radius: float) -> dict[int, list[int]]:
    """First-order neighbours: every other agent within ``radius`` in the field."""
    nbrs: dict[int, list[int]] = {a.id: [] for a in population}
    if math.isinf(radius):
        ids = [a.id for a in population]
        return {i: [j for j in ids if j != i] for i in ids}
    for a, b in combinations(population, 2):
        if math.dist(a.position, b.position) <= radius:
            nbrs[a.id].append(b.id)
            nbrs[b.id].append(a.id)
    return nbrs


def observation_criterion(inputs: ObservationInputs, eps_sc: float = EPS_SC) -> float:
    """Minimal utility an acquisition must reach: (sum K_x/K_n) * Sm/Sc."""
    if inputs.K_neighbors:
        counts = list(inputs.K_neighbors)
        if any(k <= 0 for k in counts):
            log.warning("neighbour proposition count of 0 floored to 1")
            counts = [max(k, 1) for k in counts]
        network = sum(inputs.K_x / k for k in counts)
    else:
        network = 1.0
    return network * (inputs.Sm / max(inputs.Sc, eps_sc))


def sample_premiums(
    agent: AgentState, proposition_id, neighbors: Sequence[AgentState], eps_sc: float = EPS_SC
) -> tuple[float, float]:
    """Symbolic premium = share of neighbours holding the item;
    scarcity premium = 1 - copies per neighbour, floored at ``eps_sc``."""
    if not neighbors:
        return 0.0, 1.0
    holders = sum(1 for n in neighbors if n.holdings[proposition_id] > 0)
    copies = sum(n.holdings[proposition_id] for n in neighbors)
    sm = holders / len(neighbors)
    sc = max(eps_sc, 1.0 - copies / max(1, len(neighbors)))
    return sm, sc


def observation_inputs(
    agent: AgentState, proposition_id, neighbors: Sequence[AgentState], eps_sc: float = EPS_SC
) -> ObservationInputs:
    sm, sc = sample_premiums(agent, proposition_id, neighbors, eps_sc)
    return ObservationInputs(
        agent.proposition_count,
        tuple(max(1, n.proposition_count) for n in neighbors),
        sm,
        sc,
    )


def expected_utility(agent: AgentState, proposition) -> float:
    return classify(agent.kernel, proposition.stimulus) * proposition.base_value


def should_acquire(agent: AgentState, proposition, c_x: float) -> bool:
    return expected_utility(agent, proposition) >= c_x


def imitate(agent: AgentState, counterpart: AgentState, proposition, theta_fam: float):
    """Copy the counterpart's hash genes when the object is unfamiliar.

    Returns ``(agent, fired)``.  When it fires the caller replicates the
    counterpart's decision instead of running the gate; the kernel is never
    touched.
    """
    if classify(agent.kernel, proposition.stimulus) >= theta_fam:
        return agent, False
    agent.genome = copy_hash_segment(counterpart.genome, agent.genome)
    return agent, True


def update_edges(
    population: Sequence[AgentState], records: Iterable, alpha_tol: float
) -> ArcSet:
    """Black arcs join parties of this tick's completed trades; red arcs join
    agents whose scaling factors are within ``alpha_tol``."""
    black = set()
    for r in records:
        if r.kind == "complete" and r.buyer_id != r.seller_id:
            black.add(_pair(r.buyer_id, r.seller_id))
    red = {
        _pair(a.id, b.id)
        for a, b in combinations(population, 2)
        if alpha_distance(a.kernel, b.kernel) <= alpha_tol
    }
    return ArcSet(frozenset(black), frozenset(red))


def move_agent(agent: AgentState, counterpart: AgentState, step: float) -> tuple[float, float]:
    """Position after stepping a fraction ``step`` toward the counterpart."""
    if not 0.0 < step <= 1.0:
        raise ValueError("step must lie in (0, 1]")
    return tuple(a + step * (c - a) for a, c in zip(agent.position, counterpart.position))
