from itertools import combinations, permutations

import numpy as np
import pytest

from cgsmarket.analysis import (
    FundamentalSeries, RegimeLabel, ValuationPoint, classify_regime, detect_bubble,
    detect_fluctuation, detect_transitivity_violations, fundamental_value, preferences_from_records,
    price_cv, regime_stats,
)
from cgsmarket.market_minimal import Proposition, TransactionRecord

from conftest import make_agent


def rec(tick, price, gain=10.0, obj="X", buyer=0, seller=1, kind="complete", market="minimal"):
    return TransactionRecord(tick, market, buyer, seller, obj, kind, price, gain, 0.0, 0.0, False,
                             "accepted")


# -- fluctuation -----------------------------------------------------------------

def test_fluctuation_examples():
    r = detect_fluctuation(10, {("A",): 1, ("B",): 1})
    assert r.max_ratio == 5 and r.flagged
    r = detect_fluctuation(2, {"A": 1, "B": 1})
    assert r.max_ratio == 1 and not r.flagged
    assert detect_fluctuation(4, {"A": 1, "B": 1}).flagged  # exactly 2.0
    assert detect_fluctuation(1, {"A": 1, "B": 1}).flagged  # sum is 2x the bundle


def test_fluctuation_ignores_pair_subsets_in_ratio():
    r = detect_fluctuation(3, {("A",): 1, ("B",): 2, ("A", "B"): 50})
    assert r.max_ratio == 1.0 and not r.flagged


def test_fluctuation_flags_on_cycles():
    r = detect_fluctuation(2, {"A": 1, "B": 1}, cycles=[("A", "B", "C")])
    assert r.flagged


def test_fluctuation_rejects_bad_input():
    with pytest.raises(ValueError):
        detect_fluctuation(1, {})
    with pytest.raises(ValueError):
        detect_fluctuation(0, {"A": 1})
    with pytest.raises(ValueError):
        detect_fluctuation(1, {"A": -1})


# -- transitivity ----------------------------------------------------------------

def brute_force_cycles(prefs):
    """O(n^3) triple enumeration over the strict-preference digraph."""
    beats = {(p, x if p == y else y) for x, y, p in prefs}
    items = sorted({i for x, y, _ in prefs for i in (x, y)})
    found = set()
    for trio in combinations(items, 3):
        for a, b, c in permutations(trio):
            if (a, b) in beats and (b, c) in beats and (c, a) in beats:
                i = (a, b, c).index(min(trio))
                found.add((a, b, c)[i:] + (a, b, c)[:i])
    return sorted(found)


def random_tournament(rng, n):
    items = [f"i{k}" for k in range(n)]
    return [(a, b, a if rng.random() < 0.5 else b) for a, b in combinations(items, 2)]


def test_total_order_has_no_cycles():
    assert detect_transitivity_violations([("A", "B", "A"), ("B", "C", "B"), ("A", "C", "A")]) == []


def test_planted_cycle():
    prefs = [("A", "B", "A"), ("B", "C", "B"), ("C", "A", "C")]
    assert detect_transitivity_violations(prefs) == [("A", "B", "C")]


def test_bad_preference_rejected():
    with pytest.raises(ValueError):
        detect_transitivity_violations([("A", "B", "C")])


@pytest.mark.parametrize("n", range(3, 8))
def test_tournaments_match_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        prefs = random_tournament(rng, n)
        assert detect_transitivity_violations(prefs) == brute_force_cycles(prefs)


def test_preferences_from_majority_votes():
    records = [
        rec(0, 10, obj="A", buyer=1), rec(0, 20, obj="B", buyer=1),
        rec(0, 30, obj="A", buyer=2), rec(0, 20, obj="B", buyer=2),
        rec(0, 5, obj="A", buyer=3), rec(0, 9, obj="B", buyer=3),
        rec(0, 99, obj="C", buyer=3, kind="bid"),
    ]
    assert preferences_from_records(records) == [("A", "B", "B")]


def test_preferences_tie_dropped():
    records = [rec(0, 10, obj="A", buyer=1), rec(0, 20, obj="B", buyer=1),
               rec(0, 30, obj="A", buyer=2), rec(0, 20, obj="B", buyer=2)]
    assert preferences_from_records(records) == []


# -- fundamental value and bubbles ----------------------------------------------------

X = Proposition("X", (0.5, 0.5), 100.0)


def test_fundamental_value_examples():
    assert fundamental_value(X, [make_agent(0), make_agent(1)]) == 100
    far = make_agent(2, lo=(0, 0), hi=(0.1, 0.1), anchors=((0.05, 0.05),))
    assert fundamental_value(X, [far]) == 0
    # 1-D box [0,1]: anchor 0 scores 0.8 at 1 - 0.8/1 = 0.2; anchor 0.5 at 1 - 0.3/0.5 = 0.4
    z = Proposition("Z", (0.8,), 100.0)
    pair = [make_agent(3, (0.0,), (1.0,), ((0.0,),)), make_agent(4, (0.0,), (1.0,), ((0.5,),))]
    assert fundamental_value(z, pair) == pytest.approx(30)
    with pytest.raises(ValueError):
        fundamental_value(X, [])


def test_fundamental_value_monotone():
    rng = np.random.default_rng(9)
    for _ in range(100):
        pop = [make_agent(i, anchors=(tuple(rng.uniform(0, 1, 2)),)) for i in range(5)]
        before = fundamental_value(X, pop)
        pop[int(rng.integers(5))] = make_agent(9, anchors=((0.5, 0.5),))  # score 1: the maximum
        assert fundamental_value(X, pop) >= before - 1e-12


def test_fundamental_series_holds_between_ticks():
    fs = FundamentalSeries([(0, "X", 10.0), (5, "X", 20.0)])
    assert fs(0, "X") == 10 and fs(4, "X") == 10 and fs(5, "X") == 20 and fs(99, "X") == 20
    assert fs(3, "Y") is None


def test_bubble_empty_trace():
    assert not detect_bubble([], {"X": 1.0}).flagged


def test_bubble_flags_uniform_gains_above_fundamental():
    records = [rec(t, 100.0) for t in range(1, 6)]
    rep = detect_bubble(records, {"X": 50.0})
    assert rep.flagged and rep.onset_tick == 1 and rep.end_tick == 5
    assert rep.agents == [0, 1] and rep.n_trades == 5


def test_bubble_negative_gain_breaks_universality():
    records = [rec(t, 100.0) for t in range(1, 6)]
    records[2] = rec(3, 100.0, gain=-1.0)
    assert not detect_bubble(records, {"X": 50.0}).flagged


def test_bubble_needs_fold_deviation():
    records = [rec(t, 70.0) for t in range(1, 6)]
    assert not detect_bubble(records, {"X": 50.0}).flagged  # only 1.4x
    assert detect_bubble(records, {"X": 50.0}, fold=1.4).flagged


def test_bubble_ignores_compositional_and_bids():
    records = [rec(t, 100.0, market="compositional") for t in range(1, 6)]
    records += [rec(t, 100.0, kind="bid", gain=-50) for t in range(1, 6)]
    assert not detect_bubble(records, {"X": 1.0}).flagged


def test_bubble_never_fires_at_fundamental():
    rng = np.random.default_rng(4)
    for _ in range(50):
        f = float(rng.uniform(1, 200))
        records = [rec(t, f, gain=float(rng.uniform(0, 50))) for t in sorted(rng.integers(0, 30, 40))]
        assert not detect_bubble(records, {"X": f}).flagged


def test_bubble_short_trace_cannot_fill_a_window():
    assert not detect_bubble([rec(1, 100.0), rec(2, 100.0)], {"X": 1.0}).flagged


# -- regimes ---------------------------------------------------------------------

def clouds(rng, n=1000):
    emh = np.column_stack([rng.normal(0, 1, n), rng.normal(0, 0.01, n)])
    strong = np.column_stack([rng.normal(0, 0.01, n), rng.standard_t(2, n)])
    weak_x = rng.normal(0, 0.01, n)
    weak_x[: n // 10] += rng.choice([-1, 1], n // 10) * rng.uniform(0.1, 0.3, n // 10)
    weak = np.column_stack([weak_x, rng.normal(0, 1, n)])
    return emh, strong, weak


def test_constructed_clouds():
    emh, strong, weak = clouds(np.random.default_rng(0))
    assert classify_regime(emh) == RegimeLabel.EMH_LIKE
    assert classify_regime(strong) == RegimeLabel.STRONG_POLYSEMY
    rep = regime_stats(weak)
    assert rep.label == RegimeLabel.WEAK_POLYSEMY
    assert rep.outliers_value >= 100 > rep.outliers_meaning


def test_valuation_points_accepted():
    pts = [ValuationPoint(float(i), 0.5) for i in range(20)]
    assert classify_regime(pts) == RegimeLabel.EMH_LIKE


def test_too_few_points():
    with pytest.raises(ValueError):
        classify_regime(np.zeros((9, 2)))


def test_constant_cloud_is_not_emh():
    assert regime_stats(np.ones((20, 2))).variance_ratio == 1.0


def test_shift_and_common_scale_invariance():
    rng = np.random.default_rng(1)
    for cloud in clouds(rng):
        base = classify_regime(cloud)
        for _ in range(20):
            s = rng.uniform(0.01, 100)
            shift = rng.uniform(-1e3, 1e3, 2)
            assert classify_regime(cloud * s + shift) == base


# -- dispersion ------------------------------------------------------------------

def test_price_cv():
    assert price_cv([rec(0, 10), rec(1, 10)], "X") == 0
    assert price_cv([rec(0, 10), rec(1, 30)], "X") == pytest.approx(0.5)
    assert price_cv([rec(0, 10)], "Y") is None
