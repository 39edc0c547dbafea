"""Post-hoc detectors over traces: value fluctuation, intransitivity,
bubbles against fundamental value, and value-vs-meaning regimes."""

from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .kernel import classify


class RegimeLabel(str, Enum):
    EMH_LIKE = "emh_like"
    WEAK_POLYSEMY = "weak_polysemy"
    STRONG_POLYSEMY = "strong_polysemy"


@dataclass(frozen=True)
class ValuationPoint:
    value_coord: float
    meaning_coord: float


@dataclass
class FluctuationReport:
    ensemble_id: str
    full_set_value: float
    subset_values: dict
    max_ratio: float
    transitivity_cycles: list
    flagged: bool


@dataclass
class BubbleReport:
    flagged: bool
    onset_tick: int | None = None
    end_tick: int | None = None
    agents: list[int] = field(default_factory=list)
    mean_price: float | None = None
    mean_fundamental: float | None = None
    n_trades: int = 0


@dataclass
class RegimeReport:
    label: RegimeLabel
    variance_ratio: float
    outliers_value: int
    outliers_meaning: int
    n_points: int


# -- fluctuation -----------------------------------------------------------

def _is_singleton(key) -> bool:
    return isinstance(key, str) or len(key) == 1


def detect_fluctuation(
    full_value: float,
    subset_values: Mapping,
    fold_threshold: float = 2.0,
    *,
    ensemble_id: str = "",
    cycles: Sequence = (),
) -> FluctuationReport:
    """Compare a bundle's value with the sum of its members' stand-alone values.

    ``subset_values`` maps member subsets (tuples, frozensets, or bare ids
    for singletons) to values; only singletons enter the ratio.
    """
    if not subset_values:
        raise ValueError("subset_values must not be empty")
    if full_value <= 0 or any(v <= 0 for v in subset_values.values()):
        raise ValueError("values must be positive")
    singles = [v for k, v in subset_values.items() if _is_singleton(k)]
    if not singles:
        raise ValueError("no singleton subsets to compare against")
    total = sum(singles)
    max_ratio = max(full_value / total, total / full_value)
    flagged = max_ratio >= fold_threshold or bool(cycles)
    return FluctuationReport(ensemble_id, full_value, dict(subset_values), max_ratio,
                             list(cycles), flagged)


# -- transitivity ----------------------------------------------------------

def _canonical(cycle):
    i = cycle.index(min(cycle))
    return cycle[i:] + cycle[:i]


def detect_transitivity_violations(pairwise_prefs: Iterable) -> list[tuple]:
    """All directed 3-cycles a > b > c > a, each once, rotated to start at its
    smallest item.  ``pairwise_prefs`` holds ``(x, y, preferred)`` triples."""
    beats: dict = defaultdict(set)
    for x, y, preferred in pairwise_prefs:
        if preferred not in (x, y) or x == y:
            raise ValueError(f"bad preference ({x!r}, {y!r}, {preferred!r})")
        loser = y if preferred == x else x
        beats[preferred].add(loser)
    cycles = set()
    for a in list(beats):
        for b in beats[a]:
            for c in beats.get(b, ()):
                if c != a and a in beats.get(c, ()):
                    cycles.add(_canonical((a, b, c)))
    return sorted(cycles)


def preferences_from_records(records: Iterable) -> list[tuple]:
    """Majority preferences between objects from what buyers paid.

    Each buyer votes, for every pair of objects it bought, for the one it
    paid more for on average; a strict majority of votes sets the pair's
    preference.  Majorities over heterogeneous buyers can cycle.
    """
    paid: dict = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.kind == "complete":
            paid[r.buyer_id][r.object_ref].append(r.price)
    votes: dict = defaultdict(int)
    for per_obj in paid.values():
        means = {o: sum(p) / len(p) for o, p in per_obj.items()}
        for a, b in combinations(sorted(means), 2):
            if means[a] > means[b]:
                votes[(a, b)] += 1
            elif means[b] > means[a]:
                votes[(a, b)] -= 1
    prefs = []
    for (a, b), v in sorted(votes.items()):
        if v:
            prefs.append((a, b, a if v > 0 else b))
    return prefs


# -- bubbles ---------------------------------------------------------------

def fundamental_value(proposition, population: Sequence) -> float:
    """Population-mean kernel-implied value of an object."""
    if not population:
        raise ValueError("population must not be empty")
    return sum(classify(a.kernel, proposition.stimulus) for a in population) \
        * proposition.base_value / len(population)


class FundamentalSeries:
    """Piecewise-constant fundamental values per object, keyed by tick."""

    def __init__(self, rows: Iterable[tuple[int, str, float]] = ()):
        self._series: dict[str, tuple[list[int], list[float]]] = {}
        for tick, obj, value in sorted(rows, key=lambda r: (r[1], r[0])):
            ticks, values = self._series.setdefault(obj, ([], []))
            ticks.append(tick)
            values.append(value)

    def __call__(self, tick: int, obj: str) -> float | None:
        if obj not in self._series:
            return None
        ticks, values = self._series[obj]
        i = bisect.bisect_right(ticks, tick) - 1
        return values[max(i, 0)]


def detect_bubble(
    records: Sequence,
    fundamental: Callable[[int, str], float | None] | Mapping,
    window: int = 5,
    gain_floor: float = 0.0,
    fold: float = 1.5,
) -> BubbleReport:
    """First window of ``window`` consecutive ticks in which every completed
    pairwise trade gains the buyer at least ``gain_floor`` percent and the
    mean settled price is at least ``fold`` times (and above) the mean
    fundamental value of the traded objects."""
    if isinstance(fundamental, Mapping):
        table = fundamental
        fundamental = lambda tick, obj: table.get((tick, obj), table.get(obj))  # noqa: E731
    if not records:
        return BubbleReport(False)
    first = min(r.tick for r in records)
    last = max(r.tick for r in records)
    trades: dict[int, list] = defaultdict(list)
    for r in records:
        if r.market == "minimal" and r.kind == "complete":
            trades[r.tick].append(r)
    for start in range(first, last - window + 2):
        in_window = [r for t in range(start, start + window) for r in trades.get(t, ())]
        if not in_window or any(r.gain_buyer_pct < gain_floor for r in in_window):
            continue
        funds = [fundamental(r.tick, r.object_ref) for r in in_window]
        if any(f is None for f in funds):
            continue
        mean_price = sum(r.price for r in in_window) / len(in_window)
        mean_fund = sum(funds) / len(funds)
        if mean_price > mean_fund and mean_price >= fold * mean_fund:
            agents = sorted({r.buyer_id for r in in_window} | {r.seller_id for r in in_window})
            return BubbleReport(True, start, start + window - 1, agents,
                                mean_price, mean_fund, len(in_window))
    return BubbleReport(False)


# -- regimes ---------------------------------------------------------------

def _as_array(points) -> np.ndarray:
    if len(points) and isinstance(points[0], ValuationPoint):
        return np.array([(p.value_coord, p.meaning_coord) for p in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(-1, 2)


def _outliers(x: np.ndarray, k: float) -> int:
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return int(np.count_nonzero(np.abs(x - med) > k * (q3 - q1)))


def regime_stats(points, rho: float = 2.0, outlier_k: float = 1.5) -> RegimeReport:
    xy = _as_array(points)
    if len(xy) < 10:
        raise ValueError("need at least 10 points")
    if not np.all(np.isfinite(xy)):
        raise ValueError("points must be finite")
    centred = xy - np.median(xy, axis=0)
    var_x, var_y = centred.var(axis=0)
    if var_y > 0:
        ratio = var_x / var_y
    else:
        ratio = math.inf if var_x > 0 else 1.0
    out_x = _outliers(xy[:, 0], outlier_k)
    out_y = _outliers(xy[:, 1], outlier_k)
    if ratio >= rho:
        label = RegimeLabel.EMH_LIKE
    elif out_x < out_y:
        label = RegimeLabel.STRONG_POLYSEMY
    else:
        label = RegimeLabel.WEAK_POLYSEMY
    return RegimeReport(label, float(ratio), out_x, out_y, len(xy))


def classify_regime(points, rho: float = 2.0, outlier_k: float = 1.5) -> RegimeLabel:
    """Value-axis dominated spread reads as EMH-like; otherwise polysemic,
    strong when the meaning axis carries more outliers than the value axis.

    Outliers lie beyond ``outlier_k`` interquartile ranges from the median.
    """
    return regime_stats(points, rho, outlier_k).label


# -- dispersion ------------------------------------------------------------

def price_cv(records: Iterable, obj: str, market: str = "minimal") -> float | None:
    """Coefficient of variation of settled prices for one object."""
    prices = np.array([r.price for r in records
                       if r.kind == "complete" and r.object_ref == obj and r.market == market])
    if prices.size == 0 or prices.mean() == 0:
        return None
    return float(prices.std() / prices.mean())
