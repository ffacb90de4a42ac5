import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_auction.valuation import MoneyGrid, ValuationDistribution, make_distribution, mean, myerson, sample, tail


def test_uniform_mass(uniform101):
    assert uniform101.grid.size == 101
    assert all(p == Fraction(1, 101) for p in uniform101.pmf)
    assert mean(uniform101) == Fraction(1, 2)


def test_point_mass():
    d = make_distribution({"kind": "point", "value": "0.5"})
    assert d.pmf[d.grid.to_ticks("0.5")] == 1
    assert d.mean == Fraction(1, 2)
    d3 = make_distribution({"kind": "point", "value": "0.3", "B": 1})
    assert mean(d3) == Fraction(3, 10)
    assert tail(d3, "0.5") == 0
    stats = myerson(d3)
    assert stats.price == Fraction(3, 10) and stats.revenue == Fraction(3, 10)


def test_equal_revenue_mean_and_flat_revenue():
    H = Fraction("2.718")
    d = make_distribution({"kind": "equal_revenue", "H": "2.718", "tick": "0.001"})
    exact = 1 + math.log(float(H))
    assert abs(float(d.mean) - exact) < 2e-3
    # p * Pr(v >= p) is exactly 1 on [1, H], so the lowest such price wins
    for p in ("1", "1.5", "2", "2.718"):
        assert Fraction(p) * d.tail(p) == 1
    assert d.myerson.price == 1
    assert d.myerson.revenue == 1


def test_equal_revenue_mean_converges():
    errs = []
    for tick in ("0.01", "0.001"):
        d = make_distribution({"kind": "equal_revenue", "H": "2.7", "tick": tick})
        errs.append(abs(float(d.mean) - (1 + math.log(2.7))))
    assert errs[1] < errs[0]


def test_tail_examples(uniform101):
    assert tail(uniform101, "0.5") == Fraction(51, 101)
    assert tail(uniform101, 0) == 1
    with pytest.raises(ValueError):
        tail(uniform101, "0.505")


def test_myerson_uniform(uniform101):
    stats = myerson(uniform101)
    assert stats.price == Fraction(1, 2)
    assert stats.revenue == Fraction(1, 2) * Fraction(51, 101)
    assert stats.revenue == stats.price * stats.tail_at_price
    for p in uniform101.grid.values():
        assert stats.revenue >= p * uniform101.tail(p)


def test_rejections():
    with pytest.raises(ValueError):
        ValuationDistribution(MoneyGrid("0.5", 1), (Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(ValueError):
        make_distribution({"kind": "uniform", "B": "1.005", "tick": "0.01"})
    with pytest.raises(ValueError):
        make_distribution({"kind": "equal_revenue", "H": "2.7182", "tick": "0.001"})
    with pytest.raises(ValueError):
        make_distribution({"kind": "uniform", "B": 1, "colour": "red"})
    with pytest.raises(ValueError):
        make_distribution({"kind": "lognormal"})


def test_pmf_within_tolerance_is_renormalised():
    g = MoneyGrid("0.5", 1)
    d = ValuationDistribution(g, (0.2, 0.3, 0.5 + 1e-13))
    assert sum(d.pmf) == 1


def test_exponential_builds():
    d = make_distribution({"kind": "exponential", "rate": 2.0, "tick": "0.01"})
    assert sum(d.pmf) == 1
    assert 0 < d.mean < Fraction(1, 2)


def test_sample_determinism(uniform101):
    r1, r2 = np.random.default_rng(11), np.random.default_rng(11)
    seq1 = [sample(uniform101, r1) for _ in range(50)]
    seq2 = [sample(uniform101, r2) for _ in range(50)]
    assert seq1 == seq2
    assert set(seq1) <= set(uniform101.grid.values())
    point = make_distribution({"kind": "point", "value": "0.3", "B": 1})
    assert {point.sample(r1) for _ in range(20)} == {Fraction(3, 10)}


def test_scalar_and_bulk_sampling_agree(uniform101):
    bulk = uniform101.sample_ticks(np.random.default_rng(3), 100)
    r = np.random.default_rng(3)
    assert list(bulk) == [uniform101.sample_ticks(r) for _ in range(100)]


def test_sample_clt_and_frequencies(uniform101):
    n = 10**6
    ticks = uniform101.sample_ticks(np.random.default_rng(99), n)
    vals = ticks * 0.01
    sigma = math.sqrt(float(sum(p * (k * Fraction(1, 100) - Fraction(1, 2)) ** 2 for k, p in enumerate(uniform101.pmf))))
    assert abs(vals.mean() - 0.5) < 3 * sigma / math.sqrt(n)
    freq = np.bincount(ticks, minlength=101) / n
    p = 1 / 101
    assert np.all(np.abs(freq - p) < 4 * math.sqrt(p * (1 - p) / n))


def test_trailing_zero_mass_never_sampled():
    d = make_distribution({"kind": "explicit", "B": 1, "tick": "0.25", "pmf": ["0.5", "0.5", 0, 0, 0]})
    ticks = d.sample_ticks(np.random.default_rng(0), 10000)
    assert set(np.unique(ticks)) <= {0, 1}


@st.composite
def explicit_dists(draw):
    n = draw(st.integers(1, 12))
    weights = draw(st.lists(st.integers(0, 20), min_size=n + 1, max_size=n + 1).filter(lambda w: sum(w) > 0))
    total = sum(weights)
    return make_distribution(
        {"kind": "explicit", "B": n, "tick": 1, "pmf": [Fraction(w, total) for w in weights]}
    )


@settings(max_examples=60, deadline=None)
@given(explicit_dists())
def test_distribution_properties(d):
    assert sum(d.pmf) == 1
    assert d.mean == sum(k * d.tick * p for k, p in enumerate(d.pmf))
    stats = d.myerson
    assert d.grid.on_grid(stats.price)
    assert stats.revenue == stats.price * stats.tail_at_price
    for p in d.grid.values():
        rev = p * d.tail(p)
        assert stats.revenue >= rev
        if rev == stats.revenue:
            assert stats.price <= p
    tails = [d.tail(p) for p in d.grid.values()]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
