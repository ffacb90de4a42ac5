import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_auction.agents import (
    EtcAgent,
    EtcState,
    Exp3State,
    Expert,
    LookaheadAgent,
    Observation,
    StayGoodAgent,
    etc_block_length,
    etc_observe,
    etc_step,
    exp3_step,
    exp3_update,
    expert_grid,
    myopic_bid,
    stay_good_bid,
    truthful_bid,
)
from robust_auction.mechanism import AvgBidLedger, make_mechanism
from robust_auction.simulator import run_trajectory


def obs(good, v, t=1, T=10):
    return Observation(good, v, t, T)


def test_myopic_bid():
    assert myopic_bid(obs(True, 90), 50) == 0
    assert myopic_bid(obs(False, 80), 50) == 50
    assert myopic_bid(obs(False, 30), 50) == 0


def test_stay_good_bid(mep):
    assert stay_good_bid(AvgBidLedger(0, 0), obs(True, 10, 1, 1000), mep) == 25
    assert stay_good_bid(AvgBidLedger(60, 2), obs(True, 10, 5, 1000), mep) == 15
    assert stay_good_bid(AvgBidLedger(60, 2), obs(True, 10, 1000, 1000), mep) == 0
    assert stay_good_bid(AvgBidLedger(0, 2), obs(False, 80, 3, 1000), mep) == 50
    assert stay_good_bid(AvgBidLedger(300, 2), obs(True, 10, 5, 1000), mep) == 0


def test_truthful_bid():
    assert truthful_bid(obs(True, 70)) == 70
    assert truthful_bid(obs(False, 0)) == 0


def test_expert_map_and_grid():
    e = Expert(3, 5)
    assert e.bid(True, 0) == 3
    assert e.bid(False, 6) == 5 and e.bid(False, 4) == 0
    grid = expert_grid(100, 10)
    assert len(grid) == 121 and Expert(0, 50) in grid and Expert(40, 40) in grid


def test_exp3_initial_probabilities():
    s = Exp3State.fresh(121, 10**6)
    assert np.allclose(s.probabilities, 1 / 121)
    assert math.isclose(s.eta, math.sqrt(math.log(121) / (121 * 10**6)))


def test_exp3_update_traces():
    s = Exp3State.fresh(2, 100)
    exp3_step(s, [Expert(0, 0), Expert(1, 1)], obs(True, 5), 0.1)
    assert s.last_probability == 0.5
    before = s.log_weights.copy()
    exp3_update(s, 0, 10.0, 10.0)  # top reward: no loss, weight unchanged
    assert np.array_equal(s.log_weights, before)
    exp3_update(s, 0, -10.0, 10.0)  # zero reward, probability 1/2: loss estimate 2
    assert math.isclose(s.weights[0], math.exp(-2 * s.eta))
    assert s.weights[1] == 1.0
    with pytest.raises(ValueError):
        exp3_update(s, 0, 10.5, 10.0)


def test_exp3_concentrates_on_rewarded_expert():
    experts = expert_grid(3)
    s = Exp3State.fresh(len(experts), 500)
    rng = np.random.default_rng(0)
    for _ in range(500):
        _, i = exp3_step(s, experts, obs(True, 2), rng.random())
        exp3_update(s, i, 3.0 if i == 0 else -3.0, 3.0)
        p = s.probabilities
        assert abs(p.sum() - 1) < 1e-12 and np.all(np.isfinite(s.log_weights))
    assert s.probabilities[0] > 1 / len(experts)


def test_exp3_max_rewards_keep_weights():
    experts = expert_grid(2)
    s = Exp3State.fresh(len(experts), 50)
    for t in range(50):
        _, i = exp3_step(s, experts, obs(True, 1), (t * 0.37) % 1)
        exp3_update(s, i, 2.0, 2.0)
    assert np.array_equal(s.weights, np.ones(len(experts)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1, exclude_max=True), st.floats(-1, 1)), min_size=1, max_size=200))
def test_exp3_simplex_invariant(steps):
    experts = expert_grid(3)
    s = Exp3State.fresh(len(experts), 10**4)
    for u, util in steps:
        _, i = exp3_step(s, experts, obs(False, 2), u)
        exp3_update(s, i, util, 1.0)
        p = s.probabilities
        assert abs(p.sum() - 1) < 1e-12
        assert np.all(p >= 0) and np.all(np.isfinite(s.log_weights))


def test_etc_schedule():
    assert etc_block_length(10**6, 11) == 910
    assert etc_block_length(1000, 11) == 100
    st_ = EtcState(np.arange(3), 100, 10, 2, 10**4)
    assert etc_step(st_, obs(True, 0, 1, 10**4)) == 0
    assert st_.explore_rounds == 300


def test_etc_recovery_and_commit():
    st_ = EtcState(np.arange(3), 20, 2, 2, 100)
    bids = []
    for r in range(1, 101):
        good = not (21 <= r <= 24)  # block 1 opens in a bad state
        b = etc_step(st_, obs(good, 1, r, 100))
        bids.append(b)
        etc_observe(st_, {0: 0.1, 1: 0.5, 2: 0.5}[b] if st_._counted else -9.0)
    assert bids[20:24] == [2, 2, 2, 2]  # recovery bids
    assert bids[24:40] == [1] * 16
    assert st_.plays.tolist() == [18, 14, 18]
    assert st_.committed_bid == 1  # tie between 1 and 2 goes to the lower bid
    assert set(bids[60:]) == {1}


def test_etc_commits_to_threshold_bid(uniform11):
    m = make_mechanism("mep", uniform11, "0.2", "0.1", 100000)
    for seed in range(3):
        tr = run_trajectory(m, EtcAgent(), uniform11, seed=seed)
        start = tr.info["explore_rounds"]
        assert tr.info["committed_bid"] == 4  # (1 - eps) * mu = 0.4
        assert len(set(tr.bids[start:].tolist())) == 1
        assert start == 11 * etc_block_length(100000, 11)


def test_etc_explore_rounds_independent_of_rewards(uniform11):
    rounds = set()
    for kind, rho in (("mep", "0.1"), ("mep", "0.9"), ("warmup", "0.5")):
        m = make_mechanism(kind, uniform11, "0.2", rho, 5000)
        rounds.add(run_trajectory(m, EtcAgent(), uniform11, seed=4).info["explore_rounds"])
    assert rounds == {11 * 100}


@pytest.mark.parametrize("k", [1, 2, 3, "random"])
def test_lookahead_agent_stays_good(desk, k):
    mech, dist = desk
    tr = run_trajectory(mech, LookaheadAgent(dist, k), dist, seed=1)
    sg = run_trajectory(mech, StayGoodAgent(), dist, seed=1)
    assert tr.good.all()
    assert np.array_equal(tr.bids[:-1], sg.bids[:-1])


def test_lookahead_agent_needs_grid_threshold(uniform101):
    m = make_mechanism("mep", uniform101, "0.33", "0.2", 5)
    with pytest.raises(ValueError):
        run_trajectory(m, LookaheadAgent(uniform101, 1), uniform101, seed=0)


def test_stay_good_agent_invariants(mep, uniform101):
    tr = run_trajectory(mep, StayGoodAgent(), uniform101, seed=2)
    assert tr.good.all()
    assert Fraction(int(tr.bids[:-1].sum()), 999) * mep.tick == Fraction(1, 4)
    assert tr.total_utility >= 0
