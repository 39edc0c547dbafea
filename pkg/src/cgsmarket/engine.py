"""The tick loop.

One numpy ``Generator`` seeded from the config drives every stochastic
choice, drawn in this order:

set-up
    one genome seed per agent (a single seed when ``homogeneous``), then one
    holder draw per unassigned object copy, objects in catalog order.
each tick
    the permutation of candidate trading edges; per matched pair a role
    coin and an offered-object index; then, only when mutation is on, one
    mutation seed per agent in id order.

Phases per tick: observation (who wants what), scripted trades, the
pairwise market, a compositional auction round every
``compositional_every`` ticks, arcs and mobility, mutation, bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import trace as tr
from .analysis import fundamental_value
from .config import ClusterSpec, Config
from .genome import Genome, genome_row, mutate, new_genome
from .kernel import build_kernel, classify, kernel_row, rescale
from .market_compositional import auction_round, feedback_adjust, link, round_summary_row
from .market_minimal import (
    Proposition, TransactionRecord, net_gain, pay, perceived_value, propose_trade,
    settle_pairwise, transfer,
)
from .network import (
    AgentState, imitate, move_agent, neighbor_map, observation_criterion,
    observation_inputs, should_acquire, update_edges,
)

SEED_BOUND = 2**63


@dataclass
class RunResult:
    config: Config
    trace: tr.Trace
    agents: list[AgentState]
    rounds: list[list[str]] = field(default_factory=list)
    fundamentals: list[list[str]] = field(default_factory=list)
    valuations: list[list[str]] = field(default_factory=list)
    genomes: list[list[str]] = field(default_factory=list)
    kernels: list[list[str]] = field(default_factory=list)
    edges: list[list[str]] = field(default_factory=list)
    positions: list[list[str]] = field(default_factory=list)
    # (tick, total balance, cumulative minted); tick 0 is the initial state
    ledger: list[tuple[int, float, float]] = field(default_factory=list)
    # per tick: object id -> copies held across the population
    ownership: list[dict[str, int]] = field(default_factory=list)

    @property
    def records(self) -> list[TransactionRecord]:
        return self.trace.records

    def files(self) -> dict[str, str]:
        """File name -> contents, exactly as ``write`` lays them out."""
        cfg = self.config
        n, m = cfg.n_dims, cfg.n_anchors
        genome_cols = (["tick", "agent_id", "flexibility", "hash_genes"]
                       + [f"extent_{d}" for d in range(n)]
                       + [f"anchor_{a}_{d}" for a in range(m) for d in range(n)])
        kernel_cols = (["tick", "agent_id"] + [f"alpha_{d}" for d in range(n)]
                       + [f"lo_{d}" for d in range(n)] + [f"hi_{d}" for d in range(n)])
        tables = {
            "rounds.csv": (tr.ROUND_COLUMNS, self.rounds),
            "fundamentals.csv": (tr.FUNDAMENTAL_COLUMNS, self.fundamentals),
            "valuations.csv": (tr.VALUATION_COLUMNS, self.valuations),
            "genomes.csv": (genome_cols, self.genomes),
            "kernels.csv": (kernel_cols, self.kernels),
            "edges.csv": (tr.EDGE_COLUMNS, self.edges),
            "positions.csv": (tr.POSITION_COLUMNS, self.positions),
        }
        out = {"trace.csv": self.trace.dumps()}
        for name, (cols, rows) in tables.items():
            lines = [",".join(cols)] + [",".join(r) for r in rows]
            out[name] = "\n".join(lines) + "\n"
        return out

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files().items():
            (out / name).write_text(text, encoding="utf-8")
        return out


def cluster_sizes(clusters, n: int) -> list[int]:
    """Split ``n`` agents by weight, largest remainders first (ties: earlier cluster)."""
    total = sum(c.weight for c in clusters)
    exact = [c.weight / total * n for c in clusters]
    sizes = [math.floor(x) for x in exact]
    order = sorted(range(len(clusters)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def clustered_genome(seed: int, cfg: Config, cluster: ClusterSpec | None) -> Genome:
    """Random genome, with anchors drawn around a cluster centre when given."""
    g = new_genome(seed, cfg.n_dims, cfg.n_anchors, cfg.hash_len)
    if cluster is None:
        return g
    rng = np.random.default_rng([seed, 1])
    centre = np.asarray(cluster.center)
    anchors = np.clip(centre + cluster.spread * rng.normal(size=(cfg.n_anchors, cfg.n_dims)), 0, 1)
    extents = cluster.extent if cluster.extent is not None else g.extents
    flex = cluster.flexibility if cluster.flexibility is not None else g.flexibility_gene
    return Genome.from_parts(extents, anchors.tolist(), g.hash_genes, flex)


def _field_position(kernel) -> tuple[float, float]:
    c = [sum(a[d] for a in kernel.anchors) / len(kernel.anchors) for d in range(kernel.n_dims)]
    return (c[0], c[1]) if len(c) > 1 else (c[0], 0.5)


class Simulation:
    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.catalog = {o.id: Proposition(o.id, tuple(o.stimulus), o.base_value) for o in cfg.objects}
        self.agents = self._populate()
        self._distribute_holdings()
        self.ensembles = [
            link(e.operator, [self.catalog[m] for m in e.members], e.linkage, e.id)
            for e in cfg.ensembles
        ]
        self.records: list[TransactionRecord] = []
        self.result = RunResult(cfg, tr.Trace(self._header()), self.agents)
        self.minted = 0.0
        self.result.ledger.append((0, self.total_balance(), 0.0))
        self._signals_from: list[TransactionRecord] = []

    def _header(self) -> dict[str, str]:
        return {
            "version": tr.FORMAT_VERSION,
            "seed": str(self.cfg.seed),
            "config_sha256": self.cfg.sha256(),
            "config": self.cfg.to_json(),
        }

    def _populate(self) -> list[AgentState]:
        cfg = self.cfg
        clusters: list = []
        for c, size in zip(cfg.clusters, cluster_sizes(cfg.clusters, cfg.population)):
            clusters.extend([c] * size)
        if not clusters:
            clusters = [None] * cfg.population
        if cfg.homogeneous:
            g = clustered_genome(int(self.rng.integers(SEED_BOUND)), cfg, clusters[0])
            genomes = [g] * cfg.population
        else:
            genomes = [clustered_genome(int(self.rng.integers(SEED_BOUND)), cfg, c)
                       for c in clusters]
        agents = []
        for i, g in enumerate(genomes):
            k = build_kernel(g)
            agents.append(AgentState(i, g, k, _field_position(k), float(cfg.initial_balance)))
        return agents

    def _distribute_holdings(self) -> None:
        for o in self.cfg.objects:
            holders = o.holders or [int(self.rng.integers(self.cfg.population))
                                    for _ in range(o.copies)]
            for h in holders:
                self.agents[h].holdings[o.id] += 1

    def total_balance(self) -> float:
        return math.fsum(a.balance for a in self.agents)

    # -- phases ------------------------------------------------------------

    def _wants(self, nbrs, signals) -> list[set]:
        wants = []
        for a in self.agents:
            peers = [self.agents[j] for j in nbrs[a.id]]
            w = set()
            for pid, prop in self.catalog.items():
                c_x = observation_criterion(observation_inputs(a, pid, peers, self.cfg.eps_sc),
                                            self.cfg.eps_sc)
                if should_acquire(a, prop, c_x):
                    w.add(pid)
            if self.cfg.imitation:
                w.update(signals[a.id])
            wants.append(w)
        return wants

    def _signals(self, nbrs) -> list[dict[str, TransactionRecord]]:
        """Objects each agent saw a neighbour buy at a gain last tick."""
        signals: list[dict] = [{} for _ in self.agents]
        for r in self._signals_from:
            if r.market == "minimal" and r.kind == "complete" and r.gain_buyer_pct > 0:
                for j in nbrs[r.buyer_id]:
                    signals[j].setdefault(r.object_ref, r)
        return signals

    def _scripted(self, t: int, out: list) -> set[int]:
        busy = set()
        for s in self.cfg.script:
            if s.tick != t:
                continue
            buyer, seller = self.agents[s.buyer], self.agents[s.seller]
            prop = self.catalog[s.object]
            busy.update((s.buyer, s.seller))
            value = s.buyer_value if s.buyer_value is not None else perceived_value(buyer, prop)
            if seller.holdings[prop.id] < 1:
                out.append(TransactionRecord(t, "minimal", buyer.id, seller.id, prop.id, "bid",
                                             s.price, 0.0, 0.0, 0.0, False, "seller_lacks_object"))
                continue
            minted = pay(buyer, seller, s.price, self.cfg.allow_mint)
            if minted is None:
                out.append(TransactionRecord(t, "minimal", buyer.id, seller.id, prop.id, "bid",
                                             s.price, 0.0, 0.0, 0.0, False, "insufficient_balance"))
                continue
            transfer(seller, buyer, prop.id)
            out.append(TransactionRecord(
                t, "minimal", buyer.id, seller.id, prop.id, "complete", s.price,
                net_gain(value, s.price), net_gain(s.price, perceived_value(seller, prop)),
                minted, False, "scripted"))
        return busy

    def _minimal_market(self, t, nbrs, wants, signals, busy, out) -> None:
        cfg = self.cfg

        def feasible(b, s):
            return any(o in wants[b] for o in self.agents[s].holdings)

        edges = [(i, j) for i in range(len(self.agents)) for j in nbrs[i]
                 if i < j and i not in busy and j not in busy
                 and (feasible(i, j) or feasible(j, i))]
        matched: set[int] = set()
        pairs = []
        for e in self.rng.permutation(len(edges)) if edges else ():
            i, j = edges[e]
            if i not in matched and j not in matched:
                matched.update((i, j))
                pairs.append((i, j))

        for i, j in pairs:
            b, s = (i, j) if self.rng.integers(2) == 0 else (j, i)
            if not feasible(b, s):
                b, s = s, b
            options = sorted(o for o in self.agents[s].holdings if o in wants[b])
            pid = options[int(self.rng.integers(len(options)))]
            buyer, seller, prop = self.agents[b], self.agents[s], self.catalog[pid]
            offer = propose_trade(seller, prop)
            score = classify(buyer.kernel, prop.stimulus)
            source = signals[b].get(pid) if cfg.imitation else None
            fired = False
            if source is not None:
                _, fired = imitate(buyer, self.agents[source.buyer_id], prop, cfg.theta_fam)
            if fired:
                rec = settle_pairwise(
                    buyer, seller, offer, prop, cfg.allow_mint, tick=t,
                    imitated_price=source.price,
                    imitated_value=source.price * (1 + source.gain_buyer_pct / 100),
                )
            else:
                rec = settle_pairwise(buyer, seller, offer, prop, cfg.allow_mint, tick=t)
                if score == 0.0 and cfg.rescale_on_novel:
                    buyer.kernel = rescale(buyer.kernel, prop.stimulus,
                                           buyer.genome.flexibility_gene)
            out.append(rec)
            if rec.kind == "complete":
                # price in units of base value, commensurate with the score
                self.result.valuations.append(
                    [str(t), str(b), pid, repr(rec.price / prop.base_value), repr(score)])

    def _compositional(self, t, out) -> None:
        cfg = self.cfg
        for n, ens in enumerate(self.ensembles):
            res = auction_round(ens, self.agents, tick=t, allow_mint=cfg.allow_mint)
            out.extend(res.records)
            self.result.rounds.append(round_summary_row(t, ens, res))
            if cfg.rescale_on_novel:
                for a in self.agents:
                    if a.id != ens.operator_id and classify(a.kernel, ens.stimulus) == 0.0:
                        a.kernel = rescale(a.kernel, ens.stimulus, a.genome.flexibility_gene)
            self.ensembles[n] = feedback_adjust(
                ens, res, cfg.band, cfg.delta, relink_after=cfg.relink_after or None,
                population=self.agents, catalog=self.catalog)

    def _move(self, records) -> None:
        for r in records:
            if r.market == "minimal" and r.kind == "complete":
                a, b = self.agents[r.buyer_id], self.agents[r.seller_id]
                pa = move_agent(a, b, self.cfg.step)
                pb = move_agent(b, a, self.cfg.step)
                a.position, b.position = pa, pb

    def _mutate(self) -> None:
        rates = self.cfg.mutation
        if rates.is_zero:
            return
        for a in self.agents:
            g = mutate(a.genome, rates, int(self.rng.integers(SEED_BOUND)))
            k = a.kernel
            anchors = tuple(tuple(min(max(x, l), h) for x, l, h in zip(p, k.lo, k.hi))
                            for p in g.anchors)
            a.genome, a.kernel = g, replace(k, anchors=anchors)

    def _snapshot(self, t, black) -> None:
        res = self.result
        for a in self.agents:
            res.genomes.append([str(t)] + genome_row(a.id, a.genome))
            res.kernels.append([str(t)] + kernel_row(a.id, a.kernel))
            res.positions.append([str(t), str(a.id), repr(a.position[0]), repr(a.position[1])])
        arcs = update_edges(self.agents, (), self.cfg.alpha_tol)
        for kind, pairs in (("black", black), ("red", arcs.red)):
            for x, y in sorted(pairs):
                res.edges.append([str(t), kind, str(x), str(y)])

    # -- driver ------------------------------------------------------------

    def step(self, t: int) -> list[TransactionRecord]:
        cfg = self.cfg
        nbrs = neighbor_map(self.agents, cfg.neighbor_radius)
        signals = self._signals(nbrs)
        wants = self._wants(nbrs, signals)
        out: list[TransactionRecord] = []
        busy = self._scripted(t, out)
        self._minimal_market(t, nbrs, wants, signals, busy, out)
        if t % cfg.compositional_every == 0:
            self._compositional(t, out)
        black = update_edges((), out, cfg.alpha_tol).black
        self._move(out)
        self._mutate()

        self.minted += math.fsum(r.minted for r in out)
        self.result.ledger.append((t, self.total_balance(), self.minted))
        owned: dict[str, int] = {pid: 0 for pid in self.catalog}
        for a in self.agents:
            for pid, n in a.holdings.items():
                owned[pid] += n
        self.result.ownership.append(owned)
        for pid, prop in self.catalog.items():
            self.result.fundamentals.append(
                [str(t), pid, repr(fundamental_value(prop, self.agents))])
        if t % cfg.snapshot_every == 0 or t == cfg.ticks:
            self._snapshot(t, black)

        self.records.extend(out)
        self._signals_from = out
        return out

    def run(self) -> RunResult:
        for t in range(1, self.cfg.ticks + 1):
            self.step(t)
        self.result.trace.records = self.records
        return self.result


def run(cfg: Config) -> RunResult:
    return Simulation(cfg).run()
