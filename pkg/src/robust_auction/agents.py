"""Buyer bidding policies.

Every agent maps an :class:`Observation` (good/bad flag, value, round) to a
bid in ticks and receives the round outcome as feedback.  Learners see only
the flag; the stay-good and lookahead agents model the informed forward-looking
buyer and are also handed the true ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .mechanism import AvgBidLedger, AvgBidMechanism, Mechanism


@dataclass(frozen=True)
class Observation:
    good: bool
    value: int
    round: int
    rounds_total: int


@dataclass(frozen=True)
class Expert:
    good_bid: int
    bad_threshold: int

    def bid(self, good: bool, value: int) -> int:
        if good:
            return self.good_bid
        return self.bad_threshold if value >= self.bad_threshold else 0


def expert_grid(n_ticks: int, step: int = 1) -> list[Expert]:
    """All (good_bid, bad_threshold) pairs on ``0, step, ..., n_ticks``."""
    pts = range(0, n_ticks + 1, step)
    return [Expert(g, b) for g in pts for b in pts]


def myopic_bid(obs: Observation, price: int) -> int:
    if obs.good:
        return 0
    return price if obs.value >= price else 0


def stay_good_bid(ledger: AvgBidLedger, obs: Observation, mech: AvgBidMechanism) -> int:
    if obs.round >= obs.rounds_total or not obs.good:
        return myopic_bid(obs, mech.price_ticks)
    return mech.min_stay_good_bid(ledger)


def truthful_bid(obs: Observation) -> int:
    return obs.value


class Agent:
    """Base policy: override ``bid``; learners also override ``feedback``."""

    name = "agent"

    def reset(self, mech: Mechanism, T: int, rng: np.random.Generator) -> None:
        self.mech = mech
        self.rng = rng

    def bid(self, obs: Observation, state) -> int:
        raise NotImplementedError

    def feedback(self, obs: Observation, bid: int, allocated: int, payment) -> None:
        pass

    def kernel_spec(self, mech: Mechanism) -> dict | None:
        """Parameters for the compiled engine, or None if unsupported."""
        return None


class MyopicAgent(Agent):
    name = "myopic"

    def bid(self, obs, state):
        return myopic_bid(obs, self.mech.price_ticks)

    def kernel_spec(self, mech):
        return {"code": K.MYOPIC}


class StayGoodAgent(Agent):
    name = "stay_good"

    def reset(self, mech, T, rng):
        if not isinstance(mech, AvgBidMechanism):
            raise TypeError("stay-good agent needs an average-bid mechanism")
        super().reset(mech, T, rng)

    def bid(self, obs, state):
        return stay_good_bid(state, obs, self.mech)

    def kernel_spec(self, mech):
        return {"code": K.STAY_GOOD} if isinstance(mech, AvgBidMechanism) else None


class TruthfulAgent(Agent):
    name = "truthful"

    def bid(self, obs, state):
        return truthful_bid(obs)

    def kernel_spec(self, mech):
        return {"code": K.TRUTHFUL}


class ConstantAgent(Agent):
    name = "constant"

    def __init__(self, bid: int):
        self.value = int(bid)

    def bid(self, obs, state):
        return self.value

    def kernel_spec(self, mech):
        return {"code": K.CONSTANT, "bid": self.value}


class ExpertAgent(Agent):
    """Follows a single fixed expert every round."""

    name = "expert"

    def __init__(self, expert: Expert):
        self.expert = expert

    def bid(self, obs, state):
        return self.expert.bid(obs.good, obs.value)

    def kernel_spec(self, mech):
        return {"code": K.EXPERT, "experts": [self.expert], "expert": 0}


@dataclass
class Exp3State:
    log_weights: np.ndarray
    weights: np.ndarray
    shift: np.ndarray
    eta: float
    last_probability: float = 1.0

    @classmethod
    def fresh(cls, n_experts: int, T: int) -> "Exp3State":
        eta = math.sqrt(math.log(n_experts) / (n_experts * T)) if n_experts > 1 else 0.0
        return cls(np.zeros(n_experts), np.ones(n_experts), np.zeros(1), eta)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def exp3_step(state: Exp3State, experts: list[Expert], obs: Observation, u: float) -> tuple[int, int]:
    i, prob = K.exp3_choose(state.weights, u)
    state.last_probability = prob
    return experts[i].bid(obs.good, obs.value), int(i)


def exp3_update(state: Exp3State, chosen: int, utility: float, B: float) -> Exp3State:
    """Rescale utility from [-B, B] to [0, 1] and apply the importance-weighted update."""
    if not -B <= utility <= B:
        raise ValueError(f"utility {utility} outside [-{B}, {B}]")
    reward = (utility + B) / (2.0 * B)
    K.exp3_update(state.log_weights, state.weights, state.shift, chosen, state.last_probability, reward, state.eta)
    return state


class Exp3Agent(Agent):
    name = "exp3"

    def __init__(self, experts: list[Expert]):
        self.experts = list(experts)

    def reset(self, mech, T, rng):
        super().reset(mech, T, rng)
        self.B = float(int(mech.params.support_bound / mech.tick))
        self.state = Exp3State.fresh(len(self.experts), T)
        self._chosen = -1

    def bid(self, obs, state):
        b, self._chosen = exp3_step(self.state, self.experts, obs, self.rng.random())
        return b

    def feedback(self, obs, bid, allocated, payment):
        exp3_update(self.state, self._chosen, obs.value * allocated - float(payment), self.B)

    def kernel_spec(self, mech):
        return {"code": K.EXP3, "experts": self.experts}


def etc_block_length(T: int, n_candidates: int, minimum: int = 100) -> int:
    # small slack so exact powers such as T = 10**6 give T^(2/3) = 10**4
    return max(math.ceil(T ** (2 / 3) / n_candidates - 1e-9), minimum)


@dataclass
class EtcState:
    """Explore each candidate bid in one contiguous block, then commit.

    A block opens with a recovery phase: while the state is flagged bad (and
    for at most half the block) the agent bids ``recovery_bid``.  The
    candidate is then played for the rest of the block and scored on every
    round after its first ``burn_in`` plays.
    """

    candidates: np.ndarray
    block_len: int
    burn_in: int
    recovery_bid: int
    rounds_total: int
    tally: np.ndarray = field(init=False)
    plays: np.ndarray = field(init=False)
    committed: int = -1
    commit_round: int = -1
    _started: bool = False
    _n_played: int = 0
    _block: int = -1
    _counted: bool = False

    def __post_init__(self):
        self.tally = np.zeros(len(self.candidates))
        self.plays = np.zeros(len(self.candidates), dtype=np.int64)

    @property
    def explore_rounds(self) -> int:
        return min(len(self.candidates) * self.block_len, self.rounds_total)

    @property
    def committed_bid(self) -> int | None:
        return None if self.committed < 0 else int(self.candidates[self.committed])


def etc_step(state: EtcState, obs: Observation) -> int:
    r = obs.round - 1
    state._counted = False
    if r < state.explore_rounds:
        j = r // state.block_len
        pos = r - j * state.block_len
        state._block = j
        if pos == 0:
            state._started = False
            state._n_played = 0
        if not state._started and (obs.good or 2 * pos >= state.block_len):
            state._started = True
        if not state._started:
            return state.recovery_bid
        state._counted = state._n_played >= state.burn_in
        state._n_played += 1
        return int(state.candidates[j])
    if state.committed < 0:
        state.committed = int(K.etc_argmax(state.tally, state.plays))
        state.commit_round = r
    return int(state.candidates[state.committed])


def etc_observe(state: EtcState, utility: float) -> None:
    if state._counted:
        state.tally[state._block] += utility
        state.plays[state._block] += 1


class EtcAgent(Agent):
    name = "etc"

    def __init__(self, candidates=None, burn_in: int = 10, min_block: int = 100):
        self.candidates = None if candidates is None else np.asarray(candidates, dtype=np.int64)
        self.burn_in = burn_in
        self.min_block = min_block

    def _candidates(self, mech):
        if self.candidates is not None:
            return self.candidates
        return np.arange(int(mech.params.support_bound / mech.tick) + 1, dtype=np.int64)

    def reset(self, mech, T, rng):
        super().reset(mech, T, rng)
        cands = self._candidates(mech)
        self.state = EtcState(cands, etc_block_length(T, len(cands), self.min_block), self.burn_in, int(cands.max()), T)

    def bid(self, obs, state):
        return etc_step(self.state, obs)

    def feedback(self, obs, bid, allocated, payment):
        etc_observe(self.state, obs.value * allocated - float(payment))

    def kernel_spec(self, mech):
        cands = self._candidates(mech)
        T = mech.params.horizon
        return {
            "code": K.ETC,
            "candidates": cands,
            "block": etc_block_length(T, len(cands), self.min_block),
            "burn_in": self.burn_in,
            "recover": int(cands.max()),
        }


class LookaheadAgent(Agent):
    """k-lookahead buyer driven by the exact backward-induction oracle.

    ``k`` may be an int (constant lookahead) or ``"random"``: a forward-looking
    buyer whose lookahead each round is drawn uniformly from ``1..T-t``.
    """

    name = "lookahead"

    def __init__(self, dist, k: int | str = 1):
        self.dist = dist
        self.k = k

    def reset(self, mech, T, rng):
        from .oracle import LookaheadOracle

        if not isinstance(mech, AvgBidMechanism):
            raise TypeError("lookahead agents need an average-bid mechanism")
        if mech.params.threshold / mech.tick != int(mech.params.threshold / mech.tick):
            raise ValueError("(1-eps)*mu must lie on the tick grid for lookahead agents")
        super().reset(mech, T, rng)
        self.oracle = LookaheadOracle(mech, self.dist)
        self.T = T

    def current_k(self, t: int) -> int:
        if self.k == "random":
            remaining = self.T - t
            return int(self.rng.integers(1, remaining + 1)) if remaining >= 1 else 0
        return int(self.k)

    def bid(self, obs, state):
        k = self.current_k(obs.round)
        money = self.dist.grid.to_money(obs.value)
        b, _ = self.oracle.optimal_bid(state, money, k, obs.round)
        return self.dist.grid.to_ticks(b)
