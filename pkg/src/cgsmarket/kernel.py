"""Scalable soft classifier over an axis-aligned box with interior anchors.

The score of a stimulus is 1 at an anchor, falls linearly with distance to
the nearest anchor, and is exactly 0 outside the box.  Novel stimuli that
overshoot the box stretch it per dimension; ``alpha`` tracks the stretch as
current extent over original extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .genome import Genome

MIN_EXTENT = 1e-3
# An interior point can sit at exactly the normalising distance only on a
# box corner; it still scores above zero.
_INTERIOR_FLOOR = 5e-324

Stimulus = Sequence[float]


@dataclass(frozen=True)
class Kernel:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    anchors: tuple[tuple[float, ...], ...]
    base_extent: tuple[float, ...]
    alpha: tuple[float, ...]

    def __post_init__(self):
        n = len(self.lo)
        if len(self.hi) != n or len(self.alpha) != n or len(self.base_extent) != n:
            raise ValueError("bounds, alpha and base_extent must share dimensionality")
        if any(not lo < hi for lo, hi in zip(self.lo, self.hi)):
            raise ValueError("every lower bound must be below its upper bound")
        if not self.anchors:
            raise ValueError("kernel needs at least one anchor")
        for a in self.anchors:
            if len(a) != n or any(not lo <= x <= hi for x, lo, hi in zip(a, self.lo, self.hi)):
                raise ValueError(f"anchor {a} lies outside the kernel box")

    @property
    def n_dims(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def contains(self, s: Stimulus) -> bool:
        return all(lo <= x <= hi for x, lo, hi in zip(s, self.lo, self.hi))

    @cached_property
    def max_anchor_corner_distance(self) -> float:
        """Largest distance from any anchor to any box corner."""
        return max(
            math.sqrt(sum(max(a - lo, hi - a) ** 2 for a, lo, hi in zip(anchor, self.lo, self.hi)))
            for anchor in self.anchors
        )


def make_kernel(lo, hi, anchors) -> Kernel:
    """Fresh kernel (alpha = 1) from explicit bounds and anchors."""
    lo = tuple(float(x) for x in lo)
    hi = tuple(float(x) for x in hi)
    return Kernel(
        lo, hi,
        tuple(tuple(float(c) for c in a) for a in anchors),
        tuple(h - l for l, h in zip(lo, hi)),
        (1.0,) * len(lo),
    )


def build_kernel(g: Genome, min_extent: float = MIN_EXTENT) -> Kernel:
    """Box of the genome's extents centred on its anchor centroid."""
    anchors = g.anchors
    n = g.n_dims
    centroid = [sum(a[d] for a in anchors) / len(anchors) for d in range(n)]
    extents = [max(e, min_extent) for e in g.extents]
    lo = [c - e / 2 for c, e in zip(centroid, extents)]
    hi = [c + e / 2 for c, e in zip(centroid, extents)]
    clamped = [tuple(min(max(x, l), h) for x, l, h in zip(a, lo, hi)) for a in anchors]
    return make_kernel(lo, hi, clamped)


def classify(k: Kernel, s: Stimulus) -> float:
    """Soft classification score in [0, 1]."""
    if len(s) != k.n_dims:
        raise ValueError(f"stimulus has {len(s)} dims, kernel has {k.n_dims}")
    if not k.contains(s):
        return 0.0
    nearest = min(math.dist(a, s) for a in k.anchors)
    score = 1.0 - nearest / k.max_anchor_corner_distance
    return max(score, _INTERIOR_FLOOR)


def rescale(k: Kernel, s: Stimulus, flexibility: float) -> Kernel:
    """Stretch the box past an overshooting stimulus.

    Each overshot bound moves to the stimulus plus ``flexibility`` times the
    overshoot, so with positive flexibility the stimulus ends up strictly
    inside.  Dimensions without overshoot are left alone; the box never
    shrinks.
    """
    if not 0.0 <= flexibility <= 1.0:
        raise ValueError("flexibility must lie in [0, 1]")
    if len(s) != k.n_dims:
        raise ValueError(f"stimulus has {len(s)} dims, kernel has {k.n_dims}")
    lo, hi = list(k.lo), list(k.hi)
    changed = False
    for d, x in enumerate(s):
        if x > hi[d]:
            hi[d] = x + flexibility * (x - hi[d])
            changed = True
        elif x < lo[d]:
            lo[d] = x - flexibility * (lo[d] - x)
            changed = True
    if not changed:
        return k
    alpha = tuple((h - l) / b for l, h, b in zip(lo, hi, k.base_extent))
    # alpha never decreases, even under float noise in h - l
    alpha = tuple(max(a, old) for a, old in zip(alpha, k.alpha))
    return Kernel(tuple(lo), tuple(hi), k.anchors, k.base_extent, alpha)


def alpha_distance(k1: Kernel, k2: Kernel) -> float:
    if k1.n_dims != k2.n_dims:
        raise ValueError("kernels differ in dimensionality")
    return max(abs(a - b) for a, b in zip(k1.alpha, k2.alpha))


def kernel_row(agent_id: int, k: Kernel) -> list[str]:
    """Snapshot fields: agent_id, alpha..., lo..., hi..."""
    return [str(agent_id)] + [repr(x) for x in (*k.alpha, *k.lo, *k.hi)]
