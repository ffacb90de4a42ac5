"""State-based repeated-auction mechanisms.

Three mechanisms share one interface (``init_state``, ``is_good``,
``allocate``, ``charge``, ``transition``):

* ``AvgBidMechanism``  -- the threshold-price mechanism M(eps, rho, p); the
  good/bad state is decided by the average of accepted bids.
* ``AvgBidMechanism(warmup=True)`` -- M(eps, rho): same ledger, but a bad
  state escapes with probability rho for *any* bid.
* ``CreditMechanism`` -- M_inf: a (TotalPaid, ExpectedPaid, round) credit
  ledger with a revenue cap R_target.

Bids and payments are in ticks.  The average-bid ledger is pure integer
arithmetic; the credit ledger carries float ticks because its slacks are
irrational.  Allocation takes the round's uniform ``coin`` (the simulator draws
one per round so counterfactual runs see the same coins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .valuation import ValuationDistribution, as_fraction


@dataclass(frozen=True)
class MechanismParams:
    epsilon: Fraction
    rho: Fraction
    price: Fraction
    horizon: int
    support_bound: Fraction
    mean: Fraction

    def __post_init__(self):
        for name in ("epsilon", "rho", "price", "support_bound", "mean"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.price < 0:
            raise ValueError("price must be nonnegative")

    @property
    def threshold(self) -> Fraction:
        """(1 - eps) * mu, the good-state average bid."""
        return (1 - self.epsilon) * self.mean

    @property
    def lookahead_rho_bound(self) -> Fraction:
        return self.epsilon / (2 - self.epsilon)

    def regime_flags(self) -> dict[str, bool]:
        return {
            "k_lookahead": self.rho <= self.lookahead_rho_bound,
            "one_lookahead": self.rho <= self.epsilon,
            "learning": self.rho < self.epsilon,
        }

    def regime_notes(self) -> list[str]:
        flags = self.regime_flags()
        notes = []
        if not flags["k_lookahead"]:
            notes.append("rho > eps/(2-eps): k-lookahead guarantee not claimed")
        if not flags["one_lookahead"]:
            notes.append("rho > eps: 1-lookahead guarantee not claimed")
        if not flags["learning"]:
            notes.append("rho >= eps: policy-regret guarantee not claimed")
        return notes


@dataclass(frozen=True)
class AvgBidLedger:
    bid_sum: int = 0
    count: int = 0


@dataclass(frozen=True)
class CreditLedger:
    total_paid: float
    expected_paid: float
    round: int = 0


@dataclass(frozen=True)
class AvgBidMechanism:
    params: MechanismParams
    tick: Fraction
    warmup: bool = False
    kind: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tick", as_fraction(self.tick))
        object.__setattr__(self, "kind", "warmup" if self.warmup else "mep")
        if not self.warmup and (self.params.price / self.tick).denominator != 1:
            raise ValueError("price must lie on the tick grid")

    @cached_property
    def threshold_ticks(self) -> Fraction:
        return self.params.threshold / self.tick

    @property
    def price_ticks(self) -> int:
        # the warmup mechanism has no price threshold in bad states
        return 0 if self.warmup else int(self.params.price / self.tick)

    @property
    def rho(self) -> float:
        return float(self.params.rho)

    def init_state(self) -> AvgBidLedger:
        return AvgBidLedger(0, 0)

    def is_good(self, state: AvgBidLedger) -> bool:
        thr = self.threshold_ticks
        return state.bid_sum * thr.denominator >= state.count * thr.numerator

    def average(self, state: AvgBidLedger) -> Fraction:
        if state.count == 0:
            return self.params.threshold
        return Fraction(state.bid_sum, state.count) * self.tick

    def allocate(self, state: AvgBidLedger, bid: int, coin: float) -> int:
        if self.is_good(state):
            return 1
        if bid >= self.price_ticks:
            return int(coin < self.rho)
        return 0

    def charge(self, state: AvgBidLedger, bid: int, allocated: int) -> int:
        return bid if allocated else 0

    def transition(self, state: AvgBidLedger, bid: int, allocated: int, payment: int) -> AvgBidLedger:
        if not allocated:
            return state
        if self.is_good(state):
            return AvgBidLedger(state.bid_sum + bid, state.count + 1)
        return AvgBidLedger(0, 0)

    def min_stay_good_bid(self, state: AvgBidLedger) -> int:
        """Smallest grid bid that keeps the next state good (from a good state)."""
        thr = self.threshold_ticks
        need = (state.count + 1) * thr.numerator - state.bid_sum * thr.denominator
        return max(0, -(-need // thr.denominator))


def r_target(T: int, mu, epsilon, B) -> float:
    """Revenue cap of M_inf, using the explicit sum of j^(-1/2)."""
    mu, epsilon, B = float(mu), float(epsilon), float(B)
    log_t = math.log(T)
    inv_sqrt_sum = math.fsum(1.0 / math.sqrt(j) for j in range(1, T + 1))
    return (
        T * mu * (1 - epsilon)
        - math.sqrt(4 * B * mu * math.sqrt(T) * log_t)
        - math.sqrt(2 * B * mu * log_t) * inv_sqrt_sum
    )


def initial_credit(T: int, mu, B) -> float:
    mu, B = float(mu), float(B)
    return mu * math.sqrt(T) + math.sqrt(4 * B * mu * math.sqrt(T) * math.log(T))


@dataclass(frozen=True)
class CreditMechanism:
    params: MechanismParams
    tick: Fraction
    kind: str = field(init=False, default="minf")

    def __post_init__(self):
        object.__setattr__(self, "tick", as_fraction(self.tick))
        if (self.params.price / self.tick).denominator != 1:
            raise ValueError("price must lie on the tick grid")

    @property
    def price_ticks(self) -> int:
        return int(self.params.price / self.tick)

    @property
    def rho(self) -> float:
        return float(self.params.rho)

    @cached_property
    def r_target(self) -> float:
        p = self.params
        return r_target(p.horizon, p.mean, p.epsilon, p.support_bound)

    @cached_property
    def r_target_ticks(self) -> float:
        return self.r_target / float(self.tick)

    @cached_property
    def step_ticks(self) -> np.ndarray:
        """EP increment for an accepted good round t (index t-1), in ticks."""
        p = self.params
        T = p.horizon
        t = np.arange(1, T + 1, dtype=np.float64)
        slack = np.sqrt(2 * float(p.support_bound) * float(p.mean) * math.log(T) / t)
        return (float(p.mean) * (1 - float(p.epsilon)) - slack) / float(self.tick)

    def init_state(self) -> CreditLedger:
        p = self.params
        return CreditLedger(initial_credit(p.horizon, p.mean, p.support_bound) / float(self.tick), 0.0, 0)

    def is_good(self, state: CreditLedger) -> bool:
        return state.total_paid >= state.expected_paid

    def allocate(self, state: CreditLedger, bid: int, coin: float) -> int:
        if self.is_good(state):
            return 1
        if bid >= self.price_ticks:
            return int(coin < self.rho)
        return 0

    def charge(self, state: CreditLedger, bid: int, allocated: int) -> float:
        if allocated and state.total_paid <= self.r_target_ticks:
            return min(float(bid), self.r_target_ticks - state.total_paid)
        return 0.0

    def transition(self, state: CreditLedger, bid: int, allocated: int, payment: float) -> CreditLedger:
        tp, ep, r = state.total_paid, state.expected_paid, state.round
        if tp >= self.r_target_ticks:
            return CreditLedger(tp, 0.0, r + 1)
        if tp >= ep:
            # good states always allocate
            return CreditLedger(tp + payment, ep + float(self.step_ticks[r]), r + 1)
        if not allocated:
            return CreditLedger(tp, ep, r + 1)
        return CreditLedger(tp, tp, r + 1)


Mechanism = AvgBidMechanism | CreditMechanism

MECHANISM_KINDS = ("mep", "warmup", "minf")


def make_mechanism(
    kind: str,
    dist: ValuationDistribution,
    epsilon,
    rho,
    T: int,
    price=None,
) -> Mechanism:
    """Build a mechanism for ``dist``; ``price=None`` uses the Myerson price."""
    if kind not in MECHANISM_KINDS:
        raise ValueError(f"unknown mechanism kind {kind!r}")
    if price is None or price == "myerson":
        price = dist.myerson.price
    params = MechanismParams(
        epsilon=epsilon,
        rho=rho,
        price=price if kind != "warmup" else 0,
        horizon=T,
        support_bound=dist.grid.max_value,
        mean=dist.mean,
    )
    if kind == "minf":
        return CreditMechanism(params, dist.tick)
    return AvgBidMechanism(params, dist.tick, warmup=(kind == "warmup"))


@dataclass
class PaymentAudit:
    cases: int
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def _random_state(mech: Mechanism, rng: np.random.Generator, n_ticks: int):
    T = mech.params.horizon
    if isinstance(mech, AvgBidMechanism):
        count = int(rng.integers(0, T + 1))
        return AvgBidLedger(int(rng.integers(0, count * n_ticks + 1)), count)
    cap = mech.r_target_ticks * 1.25 + 1
    return CreditLedger(float(rng.uniform(0, cap)), float(rng.uniform(0, cap)), int(rng.integers(0, T)))


def audit_non_payment_forceful(mech: Mechanism, fuzz_budget: int, rng: np.random.Generator) -> PaymentAudit:
    """Fuzz (state, bid) pairs: payments must be >= 0 and vanish for a zero bid."""
    n_ticks = int(mech.params.support_bound / mech.tick)
    violations = []
    for _ in range(fuzz_budget):
        state = _random_state(mech, rng, n_ticks)
        bid = int(rng.integers(0, n_ticks + 1))
        x = mech.allocate(state, bid, float(rng.random()))
        pay = mech.charge(state, bid, x)
        if pay < 0:
            violations.append({"state": state, "bid": bid, "allocated": x, "payment": pay})
        for x0 in (0, 1):
            pay0 = mech.charge(state, 0, x0)
            if pay0 != 0:
                violations.append({"state": state, "bid": 0, "allocated": x0, "payment": pay0})
    return PaymentAudit(fuzz_budget, violations)
