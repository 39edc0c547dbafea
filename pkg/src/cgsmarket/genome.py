"""Three-segment genotype: structural genes, hash genes, flexibility gene.

Structural genes are ``n_dims`` kernel extents followed by ``n_anchors``
anchor points (``n_dims`` coordinates each), all in [0, 1].  Hash genes are
the endogenous a-z string the price cipher is matched against.  The
flexibility gene scales both acceptable-price width and kernel rescaling.

Every stochastic operation takes an integer seed and is a pure function of
its arguments.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, replace

import numpy as np

ALPHABET = string.ascii_lowercase


@dataclass(frozen=True)
class Genome:
    n_dims: int
    n_anchors: int
    structural_genes: tuple[float, ...]
    hash_genes: str
    flexibility_gene: float

    def __post_init__(self):
        if self.n_dims < 1 or self.n_anchors < 1:
            raise ValueError("n_dims and n_anchors must be >= 1")
        expected = self.n_dims * (1 + self.n_anchors)
        if len(self.structural_genes) != expected:
            raise ValueError(
                f"expected {expected} structural genes, got {len(self.structural_genes)}"
            )
        if any(not 0.0 <= x <= 1.0 for x in self.structural_genes):
            raise ValueError("structural genes must lie in [0, 1]")
        if not self.hash_genes or any(c not in ALPHABET for c in self.hash_genes):
            raise ValueError("hash_genes must be a non-empty a-z string")
        if not 0.0 <= self.flexibility_gene <= 1.0:
            raise ValueError("flexibility_gene must lie in [0, 1]")

    @property
    def extents(self) -> tuple[float, ...]:
        return self.structural_genes[: self.n_dims]

    @property
    def anchors(self) -> tuple[tuple[float, ...], ...]:
        n = self.n_dims
        flat = self.structural_genes[n:]
        return tuple(tuple(flat[i * n : (i + 1) * n]) for i in range(self.n_anchors))

    @classmethod
    def from_parts(cls, extents, anchors, hash_genes: str, flexibility: float) -> "Genome":
        extents = tuple(float(e) for e in extents)
        anchors = [tuple(float(c) for c in a) for a in anchors]
        if any(len(a) != len(extents) for a in anchors):
            raise ValueError("anchor dimensionality must match extents")
        flat = extents + tuple(c for a in anchors for c in a)
        return cls(len(extents), len(anchors), flat, hash_genes, float(flexibility))


@dataclass(frozen=True)
class MutationRates:
    """Per-character indel/substitution probabilities and Gaussian jitter SDs."""

    substitution_rate: float = 0.0
    insertion_rate: float = 0.0
    deletion_rate: float = 0.0
    anchor_jitter_sd: float = 0.0
    flexibility_jitter_sd: float = 0.0

    def __post_init__(self):
        for name in ("substitution_rate", "insertion_rate", "deletion_rate"):
            p = getattr(self, name)
            if not (np.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be a probability, got {p}")
        for name in ("anchor_jitter_sd", "flexibility_jitter_sd"):
            sd = getattr(self, name)
            if not (np.isfinite(sd) and sd >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative, got {sd}")

    @property
    def is_zero(self) -> bool:
        return not any(
            (self.substitution_rate, self.insertion_rate, self.deletion_rate,
             self.anchor_jitter_sd, self.flexibility_jitter_sd)
        )


def _letters(codes) -> str:
    return "".join(ALPHABET[int(c)] for c in codes)


def new_genome(rng_seed: int, n_dims: int = 2, n_anchors: int = 3, hash_len: int = 32) -> Genome:
    """Draw a random genome; identical arguments give an identical genome."""
    if n_dims < 1 or n_anchors < 1 or hash_len < 1:
        raise ValueError("n_dims, n_anchors and hash_len must all be >= 1")
    rng = np.random.default_rng(rng_seed)
    structural = rng.random(n_dims * (1 + n_anchors))
    hash_genes = _letters(rng.integers(0, 26, size=hash_len))
    flexibility = rng.random()
    return Genome(
        n_dims, n_anchors, tuple(float(x) for x in structural), hash_genes, float(flexibility)
    )


def mutate(g: Genome, rates: MutationRates, rng_seed: int) -> Genome:
    """Return a mutated copy of ``g``.

    Draw order is fixed so a run can be replayed: for each original hash
    position, three uniforms (deletion, substitution, insertion) then two
    letter codes (substitute, inserted); then one normal per anchor
    coordinate; then one normal for flexibility.  Draws happen whatever the
    rates, so zero rates reproduce ``g`` exactly.

    Deletions and insertions shift every downstream character, which is
    what moves the set of values the hash gate accepts.  A deletion that
    would empty the string is skipped.
    """
    rng = np.random.default_rng(rng_seed)
    out: list[str] = []
    remaining = len(g.hash_genes)
    for ch in g.hash_genes:
        u_del, u_sub, u_ins = rng.random(3)
        sub_code, ins_code = rng.integers(0, 26, size=2)
        remaining -= 1
        would_empty = not out and remaining == 0 and u_ins >= rates.insertion_rate
        if u_del >= rates.deletion_rate or would_empty:
            out.append(ALPHABET[sub_code] if u_sub < rates.substitution_rate else ch)
        if u_ins < rates.insertion_rate:
            out.append(ALPHABET[ins_code])

    n = g.n_dims
    extents = g.structural_genes[:n]
    anchor_coords = np.asarray(g.structural_genes[n:], dtype=float)
    jitter = rng.normal(0.0, 1.0, size=anchor_coords.size) * rates.anchor_jitter_sd
    anchor_coords = np.clip(anchor_coords + jitter, 0.0, 1.0)
    flex = float(np.clip(g.flexibility_gene + rng.normal() * rates.flexibility_jitter_sd, 0.0, 1.0))

    structural = tuple(extents) + tuple(float(x) for x in anchor_coords)
    return Genome(g.n_dims, g.n_anchors, structural, "".join(out), flex)


def insert_char(g: Genome, pos: int, ch: str) -> Genome:
    """Deterministic single insertion; the suffix from ``pos`` shifts right by one."""
    if ch not in ALPHABET or len(ch) != 1:
        raise ValueError(f"not a hash letter: {ch!r}")
    if not 0 <= pos <= len(g.hash_genes):
        raise IndexError(pos)
    h = g.hash_genes
    return replace(g, hash_genes=h[:pos] + ch + h[pos:])


def delete_char(g: Genome, pos: int) -> Genome:
    """Deterministic single deletion; the suffix after ``pos`` shifts left by one."""
    h = g.hash_genes
    if not 0 <= pos < len(h):
        raise IndexError(pos)
    if len(h) == 1:
        raise ValueError("cannot delete the only hash character")
    return replace(g, hash_genes=h[:pos] + h[pos + 1 :])


def frame_shift(g: Genome, rng_seed: int) -> Genome:
    """One seeded insertion or deletion at a seeded position."""
    rng = np.random.default_rng(rng_seed)
    insert = bool(rng.integers(0, 2)) or len(g.hash_genes) == 1
    if insert:
        pos = int(rng.integers(0, len(g.hash_genes) + 1))
        return insert_char(g, pos, ALPHABET[int(rng.integers(0, 26))])
    return delete_char(g, int(rng.integers(0, len(g.hash_genes))))


def copy_hash_segment(source: Genome, target: Genome) -> Genome:
    """Imitation: ``target`` with ``source``'s hash genes; kernel genes untouched."""
    return replace(target, hash_genes=source.hash_genes)


def genome_row(agent_id: int, g: Genome) -> list[str]:
    """Snapshot fields: agent_id, flexibility, hash_genes, extents..., anchors..."""
    return [str(agent_id), repr(g.flexibility_gene), g.hash_genes] + [
        repr(x) for x in g.structural_genes
    ]
