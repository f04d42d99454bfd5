import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fine, pop
from odsurrogate.dist import (
    ConditionalWeightDistribution,
    _make_bin,
    build_conditional,
    load_distribution,
    sample_weight,
    write_distribution,
)
from odsurrogate.errors import DataError, InfeasibleError


def _dist(bins, width=25):
    return ConditionalWeightDistribution(width, {k: _make_bin(k * width, (k + 1) * width, *zip(*pairs)) for k, pairs in bins.items()})


def test_hand_counted_bin():
    ref = fine({("o", "y1"): 3, ("o", "y2"): 3, ("o", "y3"): 4})
    d = build_conditional(ref, pop({"o": 250}))
    assert d.population_bins == [(250, 275)]
    assert d.probabilities(250) == pytest.approx({3: 2 / 3, 4: 1 / 3})


def test_min_cell_filters_support():
    ref = fine({("o", "y1"): 1, ("o", "y2"): 2, ("o", "y3"): 7})
    assert build_conditional(ref, pop({"o": 10})).probabilities(10) == {7: 1.0}
    assert set(build_conditional(ref, pop({"o": 10}), min_cell=None).probabilities(10)) == {1, 2, 7}


def test_missing_population_is_error():
    with pytest.raises(DataError, match="no population"):
        build_conditional(fine({("o", "y"): 3}), pop({}))


def test_tally_matches_brute_force():
    rng = random.Random(4)
    edges, pops = {}, {}
    for i in range(100):
        o = f"o{i % 30}"
        pops[o] = rng.randint(0, 300)
        edges[(o, f"y{i}")] = rng.randint(3, 30)
    d = build_conditional(fine(edges), pop(pops), 25)
    tally = {}
    for (o, _), w in edges.items():
        tally.setdefault(pops[o] // 25, Counter())[w] += 1
    assert sorted(d.bins) == sorted(tally)
    for k, counter in tally.items():
        n = sum(counter.values())
        got = d.bins[k]
        assert list(got.weights) == sorted(counter)
        assert list(got.probs) == [counter[w] / n for w in sorted(counter)]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 500), st.integers(3, 200)), min_size=1, max_size=80))
def test_bins_normalised(rows):
    edges = {(f"o{i}", "y"): w for i, (_, w) in enumerate(rows)}
    pops = {f"o{i}": p for i, (p, _) in enumerate(rows)}
    d = build_conditional(fine(edges), pop(pops))
    for b in d.bins.values():
        assert abs(b.probs.sum() - 1) <= 1e-9
        assert b.weights.min() >= 3


def test_nearest_bin_fallback_ties_lower():
    d = _dist({0: [(3, 1.0)], 4: [(9, 1.0)]})
    assert d.probabilities(30) == {3: 1.0}  # bin 1: nearest is 0
    assert d.probabilities(50) == {3: 1.0}  # bin 2: tie between 0 and 4 -> lower
    assert d.probabilities(75) == {9: 1.0}
    assert d.probabilities(10_000) == {9: 1.0}  # clamps to the top bin


def test_empty_distribution_infeasible():
    with pytest.raises(InfeasibleError):
        ConditionalWeightDistribution(25, {}).resolve_bin(3)


def test_degenerate_support():
    d = _dist({0: [(3, 1.0)]})
    rng = np.random.default_rng(0)
    assert {sample_weight(d, 10, 50, rng) for _ in range(200)} == {3}


def test_fallback_when_max_below_support():
    d = _dist({0: [(5, 0.5), (9, 0.5)]})
    assert sample_weight(d, 10, 4, np.random.default_rng(0)) == 4


def test_truncation_respects_max():
    d = _dist({0: [(3, 0.2), (5, 0.3), (8, 0.5)]})
    rng = np.random.default_rng(1)
    draws = [sample_weight(d, 0, 6, rng) for _ in range(5000)]
    assert set(draws) == {3, 5}
    # renormalised over {3, 5}: P(3) = 0.4
    assert abs(draws.count(3) / 5000 - 0.4) < 3 * math.sqrt(0.24 / 5000)


def test_sampling_matches_histogram():
    rng = random.Random(9)
    edges = {("o", f"y{i}"): rng.choice([3, 3, 3, 4, 5, 6, 8, 12, 20]) for i in range(400)}
    d = build_conditional(fine(edges), pop({"o": 100}))
    probs = d.probabilities(100)
    n = 100_000
    g = np.random.default_rng(123)
    counts = Counter(sample_weight(d, 100, 10**6, g) for _ in range(n))
    chi2 = 0.0
    for w, p in probs.items():
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(counts[w] - n * p) <= 3 * sigma, w
        chi2 += (counts[w] - n * p) ** 2 / (n * p)
    df = len(probs) - 1
    assert chi2 < df + 5 * math.sqrt(2 * df)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_sample_bounds(population, max_weight, seed):
    d = _dist({0: [(3, 0.5), (10, 0.3), (40, 0.2)], 8: [(6, 1.0)]})
    w = sample_weight(d, population, max_weight, np.random.default_rng(seed))
    support = set(d.probabilities(population))
    assert w <= max_weight
    assert w >= min(support | {max_weight})


def test_sample_stream_deterministic():
    d = _dist({0: [(3, 0.5), (10, 0.3), (40, 0.2)]})
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [sample_weight(d, 1, 100, r1) for _ in range(50)] == [sample_weight(d, 1, 100, r2) for _ in range(50)]


def test_csv_roundtrip_exact(tmp_path):
    rng = random.Random(2)
    edges = {(f"o{i % 7}", f"y{i}"): rng.randint(3, 50) for i in range(200)}
    d = build_conditional(fine(edges), pop({f"o{i}": 40 * i for i in range(7)}))
    write_distribution(d, tmp_path / "d.csv")
    assert load_distribution(tmp_path / "d.csv") == d


def test_bin_width_validation():
    with pytest.raises(ValueError):
        build_conditional(fine({("o", "y"): 3}), pop({"o": 1}), 0)
