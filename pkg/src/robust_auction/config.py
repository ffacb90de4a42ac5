"""Experiment configuration: parsing, validation and object construction."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

from . import agents as A
from .mechanism import MECHANISM_KINDS, Mechanism, make_mechanism
from .valuation import ValuationDistribution, as_fraction, make_distribution

AGENT_KINDS = ("myopic", "stay_good", "lookahead", "exp3", "etc", "truthful", "constant")


class ConfigError(ValueError):
    """Validation failure carrying one message per offending field path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class MechanismSpec:
    kind: str = "mep"
    epsilon: Any = 0.5
    # "auto" picks eps / (2 - eps), the largest rho covered by the k-lookahead guarantee
    rho: Any = "auto"
    price: Any = "myerson"

    def rho_value(self) -> Fraction:
        if self.rho == "auto":
            eps = as_fraction(self.epsilon)
            return eps / (2 - eps)
        return as_fraction(self.rho)


@dataclass
class AgentSpec:
    kind: str = "myopic"
    k: Any = 1
    bid: Any = None
    expert_tick: Any = 0.1
    candidate_tick: Any = None
    burn_in: int = 10
    min_block: int = 100


@dataclass
class ExperimentConfig:
    mechanism: MechanismSpec = field(default_factory=MechanismSpec)
    agent: AgentSpec = field(default_factory=AgentSpec)
    distribution: dict = field(default_factory=lambda: {"kind": "uniform", "B": 1, "tick": "0.01"})
    T: int = 1000
    reps: int = 100
    seed: int | None = None
    out: str | None = None
    trace: str | None = None
    threads: int = 1
    regret: bool = False
    policy_regret_bids: list | None = None
    engine: str = "auto"

    def build_distribution(self) -> ValuationDistribution:
        return make_distribution(self.distribution)

    def build_mechanism(self, dist: ValuationDistribution | None = None) -> Mechanism:
        dist = self.build_distribution() if dist is None else dist
        m = self.mechanism
        return make_mechanism(m.kind, dist, m.epsilon, m.rho_value(), self.T, m.price)

    def build_agent(self, dist: ValuationDistribution, mech: Mechanism) -> A.Agent:
        return make_agent(self.agent, dist, mech)

    @property
    def regime_flags(self) -> dict[str, bool]:
        return self.build_mechanism().params.regime_flags()

    @property
    def regime_notes(self) -> list[str]:
        return self.build_mechanism().params.regime_notes()


def _step_ticks(money, dist: ValuationDistribution, path: str) -> int:
    step = as_fraction(money) / dist.tick
    if step.denominator != 1 or step <= 0:
        raise ConfigError([f"{path}: {money} is not a positive multiple of the tick {dist.tick}"])
    return int(step)


def make_agent(spec: AgentSpec, dist: ValuationDistribution, mech: Mechanism) -> A.Agent:
    n = dist.grid.n_ticks
    if spec.kind == "myopic":
        return A.MyopicAgent()
    if spec.kind == "stay_good":
        return A.StayGoodAgent()
    if spec.kind == "truthful":
        return A.TruthfulAgent()
    if spec.kind == "constant":
        return A.ConstantAgent(dist.grid.to_ticks(spec.bid))
    if spec.kind == "lookahead":
        return A.LookaheadAgent(dist, spec.k)
    if spec.kind == "exp3":
        return A.Exp3Agent(A.expert_grid(n, _step_ticks(spec.expert_tick, dist, "agent.expert_tick")))
    if spec.kind == "etc":
        cands = None
        if spec.candidate_tick is not None:
            cands = range(0, n + 1, _step_ticks(spec.candidate_tick, dist, "agent.candidate_tick"))
        return A.EtcAgent(cands, burn_in=spec.burn_in, min_block=spec.min_block)
    raise ConfigError([f"agent.kind: unknown agent {spec.kind!r}"])


def _section(cls, doc: Any, path: str, errors: list[str]):
    if doc is None:
        return cls()
    if not isinstance(doc, Mapping):
        errors.append(f"{path}: expected a mapping")
        return cls()
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            errors.append(f"{path}.{key}: unknown key")
    return cls(**{k: v for k, v in doc.items() if k in names})


def _number(value, path: str, errors: list[str]) -> Fraction | None:
    try:
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        errors.append(f"{path}: expected a number, got {value!r}")
        return None


def _integer(value, path: str, errors: list[str], minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path}: expected an integer, got {value!r}")
    elif value < minimum:
        errors.append(f"{path}: must be >= {minimum}, got {value}")


def parse_config(document: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a JSON-like document; raises :class:`ConfigError` listing field paths."""
    errors: list[str] = []
    if not isinstance(document, Mapping):
        raise ConfigError(["<root>: expected a mapping"])
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in document:
        if key not in names:
            errors.append(f"{key}: unknown key")

    mech = _section(MechanismSpec, document.get("mechanism"), "mechanism", errors)
    agent = _section(AgentSpec, document.get("agent"), "agent", errors)
    top = {k: v for k, v in document.items() if k in names and k not in ("mechanism", "agent")}
    cfg = ExperimentConfig(mechanism=mech, agent=agent, **top)

    if mech.kind not in MECHANISM_KINDS:
        errors.append(f"mechanism.kind: unknown mechanism {mech.kind!r}")
    eps = _number(mech.epsilon, "mechanism.epsilon", errors)
    if eps is not None and not 0 < eps < 1:
        errors.append(f"mechanism.epsilon: must lie in (0, 1), got {mech.epsilon}")
    if mech.rho != "auto":
        rho = _number(mech.rho, "mechanism.rho", errors)
        if rho is not None and not 0 <= rho <= 1:
            errors.append(f"mechanism.rho: must lie in [0, 1], got {mech.rho}")
    if mech.price != "myerson":
        price = _number(mech.price, "mechanism.price", errors)
        if price is not None and price < 0:
            errors.append("mechanism.price: must be nonnegative")

    if agent.kind not in AGENT_KINDS:
        errors.append(f"agent.kind: unknown agent {agent.kind!r}")
    if agent.kind == "lookahead" and agent.k != "random":
        _integer(agent.k, "agent.k", errors, 0)
    if agent.kind == "constant" and agent.bid is None:
        errors.append("agent.bid: required for constant agents")
    _integer(agent.burn_in, "agent.burn_in", errors, 0)
    _integer(agent.min_block, "agent.min_block", errors, 1)

    _integer(cfg.T, "T", errors, 1)
    _integer(cfg.reps, "reps", errors, 1)
    _integer(cfg.threads, "threads", errors, 1)
    if cfg.seed is not None:
        _integer(cfg.seed, "seed", errors, 0)
    if cfg.engine not in ("auto", "python", "numba"):
        errors.append(f"engine: expected auto, python or numba, got {cfg.engine!r}")
    if not isinstance(cfg.regret, bool):
        errors.append("regret: expected a boolean")
    if not isinstance(cfg.distribution, Mapping):
        errors.append("distribution: expected a mapping")
    if errors:
        raise ConfigError(errors)

    cfg.distribution = dict(cfg.distribution)
    try:
        dist = cfg.build_distribution()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError([f"distribution: {exc}"]) from None
    try:
        mech_obj = cfg.build_mechanism(dist)
    except ValueError as exc:
        raise ConfigError([f"mechanism: {exc}"]) from None
    try:
        cfg.build_agent(dist, mech_obj)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError([f"agent: {exc}"]) from None
    return cfg


def emit_config(cfg: ExperimentConfig) -> dict:
    """Plain-dict form accepted back by :func:`parse_config`."""
    return dataclasses.asdict(cfg)
