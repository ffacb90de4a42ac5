"""Exact backward induction of the l-lookahead utility for M(eps, rho, p).

Utilities are exact Fractions.  Two reductions keep the state space small,
both exact:

* every bad ledger behaves the same (a bad state only cares whether the bid
  clears the price, and an allocation resets to the borderline state), so bad
  states collapse to the single key ``BAD``;
* a good ledger (sum, n) only matters through its credit
  ``sum - n * (1 - eps) * mu``: the next state is good iff
  ``credit + bid - (1 - eps) * mu >= 0``.  The DP is therefore keyed by credit
  and shared across rounds (the mechanism is time-homogeneous; the round only
  bounds the lookahead through ``min(k, T - t)``).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, NamedTuple

from .mechanism import AvgBidLedger, AvgBidMechanism, MechanismParams
from .valuation import ValuationDistribution, as_fraction

BAD = "BAD"


class LookaheadOracle:
    """Memoised exact DP for one (mechanism, distribution) pair.

    The bid grid is the value grid plus (1 - eps) * mu when that point is off
    the grid.  Ties in every argmax go to the lowest bid.
    """

    def __init__(self, mech: AvgBidMechanism, dist: ValuationDistribution):
        if not isinstance(mech, AvgBidMechanism):
            raise TypeError("the lookahead oracle covers the average-bid mechanisms only")
        self.mech = mech
        self.dist = dist
        self.T = mech.params.horizon
        self.thr = mech.params.threshold
        self.rho = mech.params.rho
        self.price = mech.price_ticks * mech.tick
        grid = dist.grid.values()
        self.bids = sorted(set(grid) | {self.thr})
        self.values = [(k * dist.tick, p) for k, p in enumerate(dist.pmf) if p > 0]
        self._W: dict[tuple[int, Any], Fraction] = {}
        self._good_best: dict[tuple[int, Fraction], tuple[Fraction, Fraction]] = {}

    # -- state keys
    def key(self, state) -> Any:
        if state == BAD:
            return BAD
        if isinstance(state, AvgBidLedger):
            if not self.mech.is_good(state):
                return BAD
            return state.bid_sum * self.mech.tick - state.count * self.thr
        credit = as_fraction(state)
        if credit < 0:
            raise ValueError("good-state credit must be nonnegative")
        return credit

    def next_key(self, key, bid: Fraction):
        credit = key + bid - self.thr
        return credit if credit >= 0 else BAD

    # -- recursion
    def continuation(self, ell: int, key) -> Fraction:
        """W_{ell-1}(key): expected optimal (ell-1)-lookahead utility; zero when ell == 0."""
        return self.W(ell - 1, key) if ell >= 1 else Fraction(0)

    def utility(self, ell: int, key, v: Fraction, bid: Fraction) -> Fraction:
        if key == BAD:
            stay = self.continuation(ell, BAD)
            if bid >= self.price:
                return self.rho * (v - bid + self.continuation(ell, Fraction(0))) + (1 - self.rho) * stay
            return stay
        return v - bid + self.continuation(ell, self.next_key(key, bid))

    def best(self, ell: int, key, v: Fraction) -> tuple[Fraction, Fraction]:
        """(optimal bid, optimal utility) with the lowest bid on ties."""
        if key != BAD:
            # v enters additively in good states, so the argmax is v-free
            b, u = self._best_good(ell, key)
            return b, v + u
        best_b, best_u = None, None
        for b in self.bids:
            u = self.utility(ell, BAD, v, b)
            if best_u is None or u > best_u:
                best_b, best_u = b, u
        return best_b, best_u

    def _best_good(self, ell: int, key: Fraction) -> tuple[Fraction, Fraction]:
        memo = self._good_best.get((ell, key))
        if memo is None:
            best_b, best_u = None, None
            for b in self.bids:
                u = -b + self.continuation(ell, self.next_key(key, b))
                if best_u is None or u > best_u:
                    best_b, best_u = b, u
            memo = self._good_best[(ell, key)] = (best_b, best_u)
        return memo

    def W(self, ell: int, key) -> Fraction:
        if ell < 0:
            return Fraction(0)
        cached = self._W.get((ell, key))
        if cached is not None:
            return cached
        # fill lower levels first so deep lookaheads do not hit the recursion limit
        for lower in range(max(ell - 200, 0), ell, 50):
            self._W_for(lower, key)
        return self._W_for(ell, key)

    def _W_for(self, ell: int, key) -> Fraction:
        cached = self._W.get((ell, key))
        if cached is None:
            cached = sum((p * self.best(ell, key, v)[1] for v, p in self.values), Fraction(0))
            self._W[(ell, key)] = cached
        return cached

    # -- public entry points
    def horizon(self, k: int, t: int) -> int:
        return min(k, self.T - t)

    def lookahead_utility(self, state, v, bid, ell: int, t: int) -> Fraction:
        if ell > self.T - t:
            raise ValueError(f"lookahead {ell} exceeds the remaining horizon {self.T - t}")
        return self.utility(ell, self.key(state), as_fraction(v), as_fraction(bid))

    def optimal_bid(self, state, v, k: int, t: int) -> tuple[Fraction, Fraction]:
        return self.best(self.horizon(k, t), self.key(state), as_fraction(v))

    def table(self, states: Iterable, ells: Iterable[int]) -> dict:
        """UtilityTable: (state key, value, ell) -> (optimal utility, optimal bid)."""
        out = {}
        for ell in ells:
            for s in states:
                key = self.key(s)
                for v, _ in self.values:
                    b, u = self.best(ell, key, v)
                    out[(key, v, ell)] = (u, b)
        return out


_ORACLES: dict = {}


def get_oracle(mech: AvgBidMechanism, dist: ValuationDistribution) -> LookaheadOracle:
    key = (mech, dist)
    if key not in _ORACLES:
        _ORACLES[key] = LookaheadOracle(mech, dist)
    return _ORACLES[key]


def lookahead_utility(mech, dist, state, v, bid, ell: int, t: int) -> Fraction:
    return get_oracle(mech, dist).lookahead_utility(state, v, bid, ell, t)


def optimal_bid(mech, dist, state, v, k: int, t: int) -> tuple[Fraction, Fraction]:
    return get_oracle(mech, dist).optimal_bid(state, v, k, t)


# ---------------------------------------------------------------------------
# lemma verification


@dataclass
class VerificationReport:
    name: str
    params: dict
    cases: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": _jsonable(self.params),
            "cases": self.cases,
            "ok": self.ok,
            "violations": _jsonable(self.violations),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, AvgBidLedger):
        return {"bid_sum": obj.bid_sum, "count": obj.count}
    return obj


def _instance_params(mech: AvgBidMechanism, dist: ValuationDistribution, **extra) -> dict:
    p = mech.params
    return {
        "epsilon": p.epsilon,
        "rho": p.rho,
        "price": p.price,
        "T": p.horizon,
        "mu": dist.mean,
        "grid_points": dist.grid.size,
        **extra,
    }


def reachable_ledgers(mech: AvgBidMechanism, dist: ValuationDistribution, T: int) -> list[set[AvgBidLedger]]:
    """Ledgers reachable at rounds 1..T under every grid bid and allocation outcome.

    Index ``t - 1`` holds the ledgers possible at the start of round ``t``.
    """
    bids = range(dist.grid.size)
    layers = [{mech.init_state()}]
    for _ in range(T - 1):
        nxt = set()
        for s in layers[-1]:
            good = mech.is_good(s)
            for b in bids:
                if good:
                    nxt.add(mech.transition(s, b, 1, b))
                else:
                    nxt.add(s)
                    if b >= mech.price_ticks:
                        nxt.add(mech.transition(s, b, 1, b))
        layers.append(nxt)
    return layers


def _good_ledgers(mech, layers, t):
    return sorted((s for s in layers[t - 1] if mech.is_good(s)), key=lambda s: (s.count, s.bid_sum))


def verify_good_persistence(
    mech: AvgBidMechanism,
    dist: ValuationDistribution,
    k_max: int = 3,
    T: int | None = None,
    k_values: Iterable[int] | None = None,
) -> VerificationReport:
    """From every reachable good state, a k-lookahead optimal bid keeps the next state good."""
    T = mech.params.horizon if T is None else T
    if T != mech.params.horizon:
        raise ValueError("T must match the mechanism horizon")
    ks = list(range(1, k_max + 1)) if k_values is None else list(k_values)
    oracle = get_oracle(mech, dist)
    layers = reachable_ledgers(mech, dist, T)
    report = VerificationReport("good_persistence", _instance_params(mech, dist, k_values=ks))
    for t in range(1, T):
        for s in _good_ledgers(mech, layers, t):
            for v in dist.grid.values():
                for k in ks:
                    b, u = oracle.optimal_bid(s, v, k, t)
                    nxt = oracle.next_key(oracle.key(s), b)
                    report.cases += 1
                    if nxt == BAD:
                        report.violations.append({"t": t, "k": k, "ledger": s, "value": v, "bid": b, "utility": u})
    return report


def verify_border_dominance(mech: AvgBidMechanism, dist: ValuationDistribution, k: int, t: int) -> VerificationReport:
    """Optimal utility from any good state is at least that from the borderline state."""
    oracle = get_oracle(mech, dist)
    layers = reachable_ledgers(mech, dist, t)
    border = mech.init_state()
    report = VerificationReport("border_dominance", _instance_params(mech, dist, k=k, t=t))
    for s in _good_ledgers(mech, layers, t):
        for v in dist.grid.values():
            _, u = oracle.optimal_bid(s, v, k, t)
            _, u0 = oracle.optimal_bid(border, v, k, t)
            report.cases += 1
            if u < u0:
                report.violations.append({"ledger": s, "value": v, "utility": u, "border_utility": u0})
    return report


def verify_delta_positive(mech: AvgBidMechanism, dist: ValuationDistribution, k: int, t: int) -> VerificationReport:
    """Bidding (1 - eps) * mu beats every bid that leads to a bad state, strictly."""
    p = mech.params
    if p.rho <= 0 or p.rho > p.lookahead_rho_bound:
        raise ValueError("requires 0 < rho <= eps / (2 - eps)")
    if k < 1 or t >= p.horizon:
        raise ValueError("requires k >= 1 and t < T")
    oracle = get_oracle(mech, dist)
    ell = oracle.horizon(k, t)
    layers = reachable_ledgers(mech, dist, t)
    report = VerificationReport("delta_positive", _instance_params(mech, dist, k=k, t=t))
    for s in _good_ledgers(mech, layers, t):
        key = oracle.key(s)
        for v in dist.grid.values():
            u_stay = oracle.utility(ell, key, v, oracle.thr)
            for b in oracle.bids:
                if oracle.next_key(key, b) != BAD:
                    continue
                gap = u_stay - oracle.utility(ell, key, v, b)
                report.cases += 1
                if gap <= 0:
                    report.violations.append({"ledger": s, "value": v, "bid": b, "delta": gap})
    return report


# ---------------------------------------------------------------------------
# closed forms


class GeometricCheck(NamedTuple):
    closed_form: float
    enumerated: float

    @property
    def error(self) -> float:
        return abs(self.closed_form - self.enumerated)


def geometric_truncated_mean(rho: float, k: int) -> GeometricCheck:
    """E[min(X, k)] for X ~ Geometric(rho) on {1, 2, ...}, two ways."""
    if not 0 < rho <= 1 or k < 1:
        raise ValueError("requires 0 < rho <= 1 and k >= 1")
    survive = (1 - rho) ** (k - 1)
    closed = (1 - survive) / rho + survive
    terms = [j * (1 - rho) ** (j - 1) * rho for j in range(1, k)]
    terms.append(k * survive)
    return GeometricCheck(closed, math.fsum(terms))


@dataclass(frozen=True)
class MyopicRevenue:
    stationary: Fraction
    finite_horizon: float
    lower_bound: float


def myopic_markov_revenue(dist: ValuationDistribution, mech: AvgBidMechanism) -> MyopicRevenue:
    """Per-round revenue of a myopic buyer on M(eps, rho, p).

    The buyer alternates one borderline good round (bid 0) with a run of bad
    rounds, each escaping with probability q = rho * Pr(v >= p) and paying p.
    """
    p = mech.params
    price = mech.price_ticks * mech.tick
    q = p.rho * dist.tail(price)
    stationary = price * q / (1 + q)
    pf, qf = float(price), float(q)
    good, bad = 1.0, 0.0
    revenue = []
    for _ in range(p.horizon):
        revenue.append(bad * pf * qf)
        good, bad = bad * qf, good + bad * (1 - qf)
    rho = float(p.rho)
    return MyopicRevenue(
        stationary,
        math.fsum(revenue) / p.horizon,
        rho / (rho + 1) * float(dist.myerson.revenue) - 1 / p.horizon,
    )


def desk_instance(grid_points: int = 5, T: int = 8, epsilon="0.5", rho=None, price=None):
    """Uniform grid on [0, 1] with ``grid_points`` points and M(eps, rho, p*)."""
    from .mechanism import make_mechanism
    from .valuation import make_distribution

    if grid_points < 2:
        raise ValueError("grid needs at least two points")
    dist = make_distribution({"kind": "uniform", "B": 1, "tick": Fraction(1, grid_points - 1)})
    eps = as_fraction(epsilon)
    rho = eps / (2 - eps) if rho is None else as_fraction(rho)
    return make_mechanism("mep", dist, eps, rho, T, price), dist


sys.setrecursionlimit(max(sys.getrecursionlimit(), 10_000))
