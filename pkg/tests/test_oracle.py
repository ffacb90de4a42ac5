import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_auction.agents import Observation, stay_good_bid
from robust_auction.mechanism import AvgBidLedger, make_mechanism
from robust_auction.oracle import (
    BAD,
    LookaheadOracle,
    desk_instance,
    geometric_truncated_mean,
    lookahead_utility,
    myopic_markov_revenue,
    optimal_bid,
    reachable_ledgers,
    verify_border_dominance,
    verify_delta_positive,
    verify_good_persistence,
)
from robust_auction.valuation import make_distribution

F = Fraction


@pytest.fixture(scope="module")
def fine():
    d = make_distribution({"kind": "uniform", "B": 1, "tick": "0.05"})
    return make_mechanism("mep", d, "0.5", F(1, 3), 8), d


def test_lookahead_utility_examples(fine):
    m, d = fine
    assert lookahead_utility(m, d, m.init_state(), F("0.8"), F("0.3"), 0, 1) == F("0.5")
    bad = AvgBidLedger(0, 2)
    assert lookahead_utility(m, d, bad, F("0.8"), F("0.5"), 0, 1) == F("0.1")
    assert lookahead_utility(m, d, m.init_state(), F("0.8"), F("0.25"), 1, 1) == F("1.05")
    with pytest.raises(ValueError):
        lookahead_utility(m, d, m.init_state(), F("0.8"), F("0.25"), 8, 1)


def test_optimal_bid_examples(fine):
    m, d = fine
    assert optimal_bid(m, d, m.init_state(), F("0.9"), 0, 1)[0] == 0
    assert optimal_bid(m, d, m.init_state(), F("0.9"), 1, 1)[0] == F("0.25")
    assert optimal_bid(m, d, AvgBidLedger(12, 2), F("0.8"), 2, 1)[0] == F("0.15")


def test_threshold_inserted_into_bid_grid():
    d = make_distribution({"kind": "uniform", "B": 1, "tick": "0.1"})
    m = make_mechanism("mep", d, "0.3", "0.1", 6)  # (1 - eps) * mu = 0.35, off the grid
    o = LookaheadOracle(m, d)
    assert F("0.35") in o.bids
    assert optimal_bid(m, d, m.init_state(), F("0.5"), 1, 1)[0] == F("0.35")


def test_good_persistence_desk(desk):
    mech, dist = desk
    assert mech.params.rho == mech.params.lookahead_rho_bound
    rep = verify_good_persistence(mech, dist, 3, 8)
    assert rep.ok and rep.cases > 0
    assert rep.to_dict()["ok"] is True


def test_myopic_violates_persistence(desk):
    mech, dist = desk
    rep = verify_good_persistence(mech, dist, k_values=[0])
    assert not rep.ok
    first = rep.violations[0]
    assert first["ledger"] == AvgBidLedger(0, 0) and first["bid"] == 0


def test_persistence_can_fail_outside_regime():
    mech, dist = desk_instance(rho=1)
    assert not verify_good_persistence(mech, dist, 3).ok


@pytest.mark.parametrize("k", [1, 2, 3])
def test_border_and_delta_desk(desk, k):
    mech, dist = desk
    for t in range(1, 8):
        assert verify_border_dominance(mech, dist, k, t).ok
        assert verify_delta_positive(mech, dist, k, t).ok


def test_border_against_itself_is_equal(desk):
    mech, dist = desk
    o = LookaheadOracle(mech, dist)
    for v in dist.grid.values():
        assert o.optimal_bid(mech.init_state(), v, 2, 3) == o.optimal_bid(AvgBidLedger(0, 0), v, 2, 3)
    richer = AvgBidLedger(4, 1)  # average 1 > 1/4
    for v in dist.grid.values():
        assert o.optimal_bid(richer, v, 2, 3)[1] >= o.optimal_bid(mech.init_state(), v, 2, 3)[1]


def test_delta_one_lookahead_gap(desk):
    mech, dist = desk
    o = LookaheadOracle(mech, dist)
    eps, rho, mu = mech.params.epsilon, mech.params.rho, mech.params.mean
    for v in dist.grid.values():
        gap = o.utility(1, F(0), v, o.thr) - o.utility(1, F(0), v, F(0))
        assert gap >= eps * mu - rho * mu > 0


def test_delta_precondition(desk):
    _, dist = desk
    m = make_mechanism("mep", dist, "0.5", 0, 8)
    with pytest.raises(ValueError):
        verify_delta_positive(m, dist, 1, 1)
    m = make_mechanism("mep", dist, "0.5", "0.5", 8)
    with pytest.raises(ValueError):
        verify_delta_positive(m, dist, 1, 1)


def test_stay_good_agreement(desk):
    mech, dist = desk
    layers = reachable_ledgers(mech, dist, 8)
    for t, layer in enumerate(layers, start=1):
        for s in layer:
            if not mech.is_good(s):
                continue
            for v in range(dist.grid.size):
                expected = stay_good_bid(s, Observation(True, v, t, 8), mech) * dist.tick
                for k in (1, 2, 3):
                    assert optimal_bid(mech, dist, s, v * dist.tick, k, t)[0] == expected


def test_utility_table_properties(desk):
    mech, dist = desk
    o = LookaheadOracle(mech, dist)
    keys = [F(0), F(1, 4), F(3, 4), BAD]
    table = o.table(keys, range(0, 6))
    for (key, v, ell), (u, _) in table.items():
        assert u >= 0
        if ell >= 1:
            assert u >= table[(key, v, ell - 1)][0]


def test_evaluation_order_independence(desk):
    mech, dist = desk
    a, b = LookaheadOracle(mech, dist), LookaheadOracle(mech, dist)
    keys = [F(0), F(1, 4), F(1, 2), BAD]
    for ell in range(6):
        for key in keys:
            a.W(ell, key)
    for ell in reversed(range(6)):
        for key in reversed(keys):
            b.W(ell, key)
    assert a._W == b._W


def test_geometric_examples():
    g = geometric_truncated_mean(0.5, 2)
    assert g.closed_form == 1.5 and g.enumerated == 1.5
    assert geometric_truncated_mean(0.3, 1).closed_form == 1
    assert geometric_truncated_mean(1.0, 7).enumerated == 1
    with pytest.raises(ValueError):
        geometric_truncated_mean(0.0, 3)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(1, 60))
def test_geometric_identity(rho, k):
    g = geometric_truncated_mean(rho, k)
    assert g.error <= 1e-12


def test_myopic_markov_revenue():
    d = make_distribution({"kind": "uniform", "B": 1, "tick": "0.0001"})
    m = make_mechanism("mep", d, "0.5", F(1, 3), 10**4)
    r = myopic_markov_revenue(d, m)
    assert abs(float(r.stationary) - 1 / 14) < 1e-5
    assert abs(r.finite_horizon - float(r.stationary)) < 1e-3
    assert r.stationary >= F(1, 4) * d.myerson.revenue
    assert math.isclose(r.lower_bound, 0.25 * float(d.myerson.revenue) - 1e-4)
    m0 = make_mechanism("mep", d, "0.5", 0, 100)
    r0 = myopic_markov_revenue(d, m0)
    assert r0.stationary == 0 and r0.finite_horizon == 0


def test_myopic_markov_two_point_exact():
    # v = 1 always: q = rho, every bad round pays 1 with probability rho
    d = make_distribution({"kind": "point", "value": 1, "tick": 1})
    m = make_mechanism("mep", d, "0.5", F(1, 2), 3)
    r = myopic_markov_revenue(d, m)
    assert r.stationary == F(1, 3)
    # rounds: good, bad (pays w.p. 1/2), then bad w.p. 1/2 -> expected payment 1/2 + 1/4
    assert math.isclose(r.finite_horizon, (0.5 + 0.25) / 3)
