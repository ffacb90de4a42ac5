"""Trajectory execution, replication and metric aggregation.

Every replication owns three Philox streams split from ``(master_seed, rep)``:
values, allocation coins and agent randomness.  Values and coins are drawn
up front (one uniform per round each), so two runs with the same seed see the
same values and coins round by round whatever the bids are.  The compiled
engine and the Python engine consume identical inputs and produce
bit-identical trajectories.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _kernels as K
from .agents import Agent, ConstantAgent, EtcAgent, Exp3Agent, Expert, Observation
from .config import ExperimentConfig
from .mechanism import AvgBidLedger, AvgBidMechanism, CreditMechanism, Mechanism
from .valuation import ValuationDistribution

INT64_SAFE = 2**62


def rep_streams(master_seed: int, rep: int) -> tuple[np.random.Generator, ...]:
    """(values, coins, agent) generators for one replication."""
    children = np.random.SeedSequence(master_seed, spawn_key=(rep,)).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(c)) for c in children)


@dataclass
class Trajectory:
    """Per-round arrays; money is in ticks (multiply by ``tick``)."""

    good: np.ndarray
    ledger_a: np.ndarray
    ledger_b: np.ndarray
    values: np.ndarray
    bids: np.ndarray
    allocated: np.ndarray
    payments: np.ndarray
    tick: Fraction
    seed: int
    rep: int
    mechanism: str
    agent: str
    info: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.values)

    @property
    def utilities(self) -> np.ndarray:
        return self.values * self.allocated - self.payments

    @property
    def total_revenue(self) -> float:
        return math.fsum(self.payments) * float(self.tick)

    @property
    def mean_revenue(self) -> float:
        return self.total_revenue / self.T

    def exact_mean_revenue(self) -> Fraction:
        """Exact per-round revenue for integer-payment mechanisms."""
        total = Fraction(math.fsum(self.payments))
        if total.denominator != 1:
            raise ValueError("payments are not integral ticks")
        return total * self.tick / self.T

    @property
    def total_utility(self) -> float:
        return math.fsum(self.utilities) * float(self.tick)

    @property
    def bad_fraction(self) -> float:
        return 1.0 - float(self.good.mean())

    def records(self) -> Iterator[dict]:
        u = self.utilities
        for r in range(self.T):
            yield {
                "round": r + 1,
                "good": bool(self.good[r]),
                "ledger": (self.ledger_a[r], self.ledger_b[r]),
                "value": int(self.values[r]),
                "bid": int(self.bids[r]),
                "allocated": int(self.allocated[r]),
                "payment": float(self.payments[r]),
                "utility": float(u[r]),
            }

    def identical(self, other: "Trajectory") -> bool:
        names = ("good", "ledger_a", "ledger_b", "values", "bids", "allocated", "payments")
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)


# ---------------------------------------------------------------------------
# engines


def _run_python(mech, agent, dist, T, values, coins, agent_rng):
    agent.reset(mech, T, agent_rng)
    good = np.zeros(T, np.int8)
    led_a = np.zeros(T)
    led_b = np.zeros(T)
    bids = np.zeros(T, np.int64)
    alloc = np.zeros(T, np.int8)
    pay = np.zeros(T)
    state = mech.init_state()
    credit = isinstance(mech, CreditMechanism)
    for r in range(T):
        g = mech.is_good(state)
        good[r] = g
        if credit:
            led_a[r], led_b[r] = state.total_paid, state.expected_paid
        else:
            led_a[r], led_b[r] = state.bid_sum, state.count
        v = int(values[r])
        obs = Observation(g, v, r + 1, T)
        b = int(agent.bid(obs, state))
        x = mech.allocate(state, b, float(coins[r]))
        p = mech.charge(state, b, x)
        state = mech.transition(state, b, x, p)
        agent.feedback(obs, b, x, p)
        bids[r], alloc[r], pay[r] = b, x, p
    info = {}
    if isinstance(agent, EtcAgent):
        st = agent.state
        committed = st.committed if st.committed >= 0 else int(K.etc_argmax(st.tally, st.plays))
        info = {"explore_rounds": st.explore_rounds, "committed_index": committed, "commit_round": st.commit_round}
    return good, led_a, led_b, bids, alloc, pay, info


def kernel_supported(mech: Mechanism, agent: Agent, T: int) -> bool:
    if agent.kernel_spec(mech) is None:
        return False
    if isinstance(mech, AvgBidMechanism):
        thr = mech.threshold_ticks
        n = int(mech.params.support_bound / mech.tick)
        # bid_sum * den and count * num must stay inside int64
        return T * n * thr.denominator < INT64_SAFE and (T + 1) * thr.numerator < INT64_SAFE
    return True


def _run_kernel(mech, agent, T, values, coins, agent_rng):
    spec = agent.kernel_spec(mech)
    agent_i = np.zeros(7, np.int64)
    agent_f = np.zeros(2)
    agent_i[K.AI_CODE] = spec["code"]
    agent_i[K.AI_PRICE] = mech.price_ticks
    agent_i[K.AI_BID] = spec.get("bid", 0)
    agent_i[K.AI_EXPERT] = spec.get("expert", 0)
    experts = spec.get("experts", [Expert(0, 0)])
    ex_g = np.array([e.good_bid for e in experts], np.int64)
    ex_b = np.array([e.bad_threshold for e in experts], np.int64)
    cands = np.asarray(spec.get("candidates", np.zeros(1, np.int64)), np.int64)
    agent_i[K.AI_BLOCK] = spec.get("block", 1)
    agent_i[K.AI_BURN] = spec.get("burn_in", 0)
    agent_i[K.AI_RECOVER] = spec.get("recover", 0)
    n_ticks = int(mech.params.support_bound / mech.tick)
    agent_f[K.AF_RANGE] = float(n_ticks)
    if spec["code"] == K.EXP3:
        n = len(experts)
        agent_f[K.AF_ETA] = math.sqrt(math.log(n) / (n * T)) if n > 1 else 0.0
        agent_u = agent_rng.random(T)
    else:
        agent_u = np.zeros(1)

    if isinstance(mech, CreditMechanism):
        kind, num, den = K.MECH_CREDIT, 1, 1
        r_t, tp0, steps = mech.r_target_ticks, mech.init_state().total_paid, mech.step_ticks
    else:
        thr = mech.threshold_ticks
        kind, num, den = K.MECH_AVG, thr.numerator, thr.denominator
        r_t, tp0, steps = 0.0, 0.0, np.zeros(1)
    out = K.run_kernel(
        kind, values, coins, agent_u, num, den, mech.price_ticks, mech.rho, r_t, tp0, steps,
        agent_i, agent_f, ex_g, ex_b, cands,
    )
    good, led_a, led_b, bids, alloc, pay, raw = out
    info = {}
    if spec["code"] == K.ETC:
        info = {"explore_rounds": int(raw[0]), "committed_index": int(raw[1]), "commit_round": int(raw[2])}
    return good, led_a, led_b, bids, alloc, pay, info


def run_trajectory(
    mech: Mechanism,
    agent: Agent,
    dist: ValuationDistribution,
    T: int | None = None,
    seed: int = 0,
    rep: int = 0,
    engine: str = "auto",
) -> Trajectory:
    """Play ``T`` rounds: sample, bid, allocate, charge, transition, feedback."""
    T = mech.params.horizon if T is None else T
    if T != mech.params.horizon:
        raise ValueError("T must equal the mechanism horizon")
    v_rng, c_rng, a_rng = rep_streams(seed, rep)
    values = dist.sample_ticks(v_rng, T)
    coins = c_rng.random(T)
    if engine == "numba" and not kernel_supported(mech, agent, T):
        raise ValueError(f"agent {agent.name!r} with this mechanism is not supported by the compiled engine")
    use_kernel = engine == "numba" or (engine == "auto" and kernel_supported(mech, agent, T))
    if use_kernel:
        agent.reset(mech, T, a_rng)
        out = _run_kernel(mech, agent, T, values, coins, a_rng)
    else:
        out = _run_python(mech, agent, dist, T, values, coins, a_rng)
    good, led_a, led_b, bids, alloc, pay, info = out
    if isinstance(agent, EtcAgent) and info:
        info["committed_bid"] = int(agent._candidates(mech)[info["committed_index"]])
    return Trajectory(good, led_a, led_b, values, bids, alloc, pay, mech.tick, seed, rep, mech.kind, agent.name, info)


# ---------------------------------------------------------------------------
# audits and regret


@dataclass(frozen=True)
class IrAudit:
    neg_rounds: int
    min_prefix: float
    total: float

    @property
    def per_round_ok(self) -> bool:
        return self.neg_rounds == 0

    @property
    def aggregate_ok(self) -> bool:
        return self.total >= 0


def ex_post_ir_audit(traj: Trajectory) -> IrAudit:
    u = traj.utilities
    tick = float(traj.tick)
    prefix = np.cumsum(u)
    return IrAudit(int((u < 0).sum()), float(prefix.min()) * tick, math.fsum(u) * tick)


def expert_hindsight_utilities(traj: Trajectory, experts: Sequence[Expert], mech: Mechanism) -> np.ndarray:
    """Expected total utility (ticks) of each expert on the realised state/value sequence.

    The bad-state Bernoulli(rho) branch is integrated analytically.
    """
    v = traj.values.astype(np.float64)
    good = traj.good.astype(bool)
    rho = mech.rho
    price = mech.price_ticks
    if isinstance(mech, CreditMechanism):
        cap = np.maximum(mech.r_target_ticks - traj.ledger_a, 0.0)
        vg, cg = v[good], cap[good]
        vb, cb = v[~good], cap[~good]
        out = np.empty(len(experts))
        cache_g, cache_b = {}, {}
        for i, e in enumerate(experts):
            if e.good_bid not in cache_g:
                cache_g[e.good_bid] = math.fsum(vg - np.minimum(float(e.good_bid), cg))
            beta = e.bad_threshold
            if beta not in cache_b:
                hit = vb >= beta
                cache_b[beta] = rho * math.fsum(vb[hit] - np.minimum(float(beta), cb[hit])) if beta >= price else 0.0
            out[i] = cache_g[e.good_bid] + cache_b[beta]
        return out
    # average-bid ledgers: payments equal bids, so value histograms suffice
    n = int(traj.values.max(initial=0)) + 1
    n = max(n, max(max(e.good_bid, e.bad_threshold) for e in experts) + 1)
    n_good = int(good.sum())
    sum_good = float(traj.values[good].sum())
    hist_bad = np.bincount(traj.values[~good], minlength=n).astype(np.float64)
    k = np.arange(n, dtype=np.float64)
    cnt_ge = np.cumsum(hist_bad[::-1])[::-1]
    sum_ge = np.cumsum((hist_bad * k)[::-1])[::-1]
    out = np.empty(len(experts))
    for i, e in enumerate(experts):
        beta = e.bad_threshold
        bad = rho * (sum_ge[beta] - beta * cnt_ge[beta]) if beta >= price else 0.0
        out[i] = sum_good - e.good_bid * n_good + bad
    return out


def measured_regret(traj: Trajectory, experts: Sequence[Expert], mech: Mechanism) -> float:
    """Best expert's hindsight utility minus realised utility, in money."""
    best = float(expert_hindsight_utilities(traj, experts, mech).max())
    return (best - math.fsum(traj.utilities)) * float(traj.tick)


def benchmark_totals(mech, dist, realized: Trajectory, benchmark_bids: Sequence) -> dict:
    """Total utility (money) of each constant bid replayed with common random numbers."""
    out = {}
    for b in benchmark_bids:
        ticks = dist.grid.to_ticks(b)
        cf = run_trajectory(mech, ConstantAgent(ticks), dist, realized.T, realized.seed, realized.rep)
        out[dist.grid.to_money(ticks)] = cf.total_utility
    return out


def measured_policy_regret(mech, dist, realized: Trajectory, benchmark_bids: Sequence) -> float:
    """Best counterfactual constant-bid total utility minus realised total, in money."""
    totals = benchmark_totals(mech, dist, realized, benchmark_bids)
    return max(totals.values()) - realized.total_utility


# ---------------------------------------------------------------------------
# trace output


def _dec(x: Fraction) -> str:
    return format(float(x), ".12g")


def write_trace(traj: Trajectory, mech: Mechanism, path) -> None:
    """CSV trace; for the credit mechanism the avg_bid column carries TP - EP."""
    tick = traj.tick
    u = traj.utilities
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "state", "avg_bid", "value", "bid", "alloc", "payment", "utility"])
        for r in range(traj.T):
            if isinstance(mech, AvgBidMechanism):
                avg = mech.average(AvgBidLedger(int(traj.ledger_a[r]), int(traj.ledger_b[r])))
                avg_s = _dec(avg)
            else:
                avg_s = _dec(Fraction(traj.ledger_a[r] - traj.ledger_b[r]) * tick)
            w.writerow([
                r + 1,
                "G" if traj.good[r] else "B",
                avg_s,
                _dec(int(traj.values[r]) * tick),
                _dec(int(traj.bids[r]) * tick),
                int(traj.allocated[r]),
                _dec(Fraction(float(traj.payments[r])) * tick),
                _dec(Fraction(float(u[r])) * tick),
            ])


# ---------------------------------------------------------------------------
# replication


@dataclass
class RevenueReport:
    mechanism: str
    agent: str
    params: dict
    reps: int
    seed: int
    mean_revenue: float
    stderr: float
    bad_state_fraction: float
    mean_buyer_utility: float
    ir: dict
    ever_bad_fraction: float
    revenues: list[float]
    regret_per_round: float | None = None
    policy_regret_per_round: float | None = None
    explore_fraction: float | None = None
    bad_after_commit_fraction: float | None = None
    committed_bids: list | None = None
    regime: dict = field(default_factory=dict)
    regime_notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "mechanism": self.mechanism,
            "agent": self.agent,
            "params": self.params,
            "reps": self.reps,
            "seed": self.seed,
            "mean_revenue": self.mean_revenue,
            "stderr": self.stderr,
            "bad_state_fraction": self.bad_state_fraction,
            "mean_buyer_utility": self.mean_buyer_utility,
            "ir": self.ir,
            "ever_bad_fraction": self.ever_bad_fraction,
            "regime": self.regime,
            "regime_notes": self.regime_notes,
        }
        for name in ("regret_per_round", "policy_regret_per_round", "explore_fraction",
                     "bad_after_commit_fraction", "committed_bids"):
            val = getattr(self, name)
            if val is not None:
                d[name] = val
        return d


def mean_and_stderr(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    m = math.fsum(xs) / n
    if n < 2:
        return m, 0.0
    var = math.fsum((x - m) ** 2 for x in xs) / (n - 1)
    return m, math.sqrt(var / n)


@dataclass
class _RepResult:
    revenue: float
    bad_fraction: float
    ever_bad: bool
    utility: float
    ir: IrAudit
    regret: float | None
    policy_regret: float | None
    explore_fraction: float | None
    bad_after_commit: float | None
    committed_bid: Fraction | None
    traj: Trajectory | None


def _one_rep(cfg: ExperimentConfig, dist, mech, seed: int, rep: int, keep: bool) -> _RepResult:
    agent = cfg.build_agent(dist, mech)
    traj = run_trajectory(mech, agent, dist, cfg.T, seed, rep, cfg.engine)
    regret = None
    if cfg.regret and isinstance(agent, Exp3Agent):
        regret = measured_regret(traj, agent.experts, mech) / cfg.T
    policy = None
    if cfg.policy_regret_bids:
        policy = measured_policy_regret(mech, dist, traj, cfg.policy_regret_bids) / cfg.T
    explore = bad_after = committed = None
    if traj.info:
        explore = traj.info["explore_rounds"] / cfg.T
        start = traj.info["explore_rounds"]
        tail = traj.good[start:]
        bad_after = 1.0 - float(tail.mean()) if len(tail) else 0.0
        committed = dist.grid.to_money(traj.info["committed_bid"])
    return _RepResult(
        traj.mean_revenue,
        traj.bad_fraction,
        not bool(traj.good.all()),
        traj.total_utility / cfg.T,
        ex_post_ir_audit(traj),
        regret,
        policy,
        explore,
        bad_after,
        committed,
        traj if keep else None,
    )


def run_experiment(cfg: ExperimentConfig, keep_trajectories: bool = False):
    """Run ``cfg.reps`` independent replications and aggregate them.

    Returns the report, plus the trajectory list when ``keep_trajectories``.
    """
    if cfg.reps < 1:
        raise ValueError("reps must be >= 1")
    seed = cfg.seed if cfg.seed is not None else int(np.random.SeedSequence().entropy % 2**63)
    dist = cfg.build_distribution()
    mech = cfg.build_mechanism(dist)

    def job(rep):
        return _one_rep(cfg, dist, mech, seed, rep, keep_trajectories or (cfg.trace is not None and rep == 0))

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(job, range(cfg.reps)))
    else:
        results = [job(r) for r in range(cfg.reps)]

    if cfg.trace is not None:
        write_trace(results[0].traj, mech, cfg.trace)

    revenues = [r.revenue for r in results]
    mean_rev, se = mean_and_stderr(revenues)
    p = mech.params

    def avg(xs):
        xs = [x for x in xs if x is not None]
        return math.fsum(xs) / len(xs) if xs else None

    report = RevenueReport(
        mechanism=mech.kind,
        agent=cfg.agent.kind,
        params={
            "epsilon": float(p.epsilon),
            "rho": float(p.rho),
            "price": float(p.price),
            "T": cfg.T,
            "B": float(p.support_bound),
            "mu": float(p.mean),
        },
        reps=cfg.reps,
        seed=seed,
        mean_revenue=mean_rev,
        stderr=se,
        bad_state_fraction=avg([r.bad_fraction for r in results]),
        mean_buyer_utility=avg([r.utility for r in results]),
        ir={
            "neg_rounds": sum(r.ir.neg_rounds for r in results),
            "min_prefix": min(r.ir.min_prefix for r in results),
            "total": avg([r.ir.total for r in results]),
        },
        ever_bad_fraction=sum(r.ever_bad for r in results) / cfg.reps,
        revenues=revenues,
        regret_per_round=avg([r.regret for r in results]),
        policy_regret_per_round=avg([r.policy_regret for r in results]),
        explore_fraction=avg([r.explore_fraction for r in results]),
        bad_after_commit_fraction=avg([r.bad_after_commit for r in results]),
        committed_bids=[str(r.committed_bid) for r in results] if results[0].committed_bid is not None else None,
        regime=p.regime_flags(),
        regime_notes=p.regime_notes(),
    )
    if keep_trajectories:
        return report, [r.traj for r in results]
    return report
