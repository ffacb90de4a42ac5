"""Simulation and exact verification for robust state-based repeated auctions."""

from .agents import (
    EtcAgent,
    Exp3Agent,
    Expert,
    LookaheadAgent,
    MyopicAgent,
    Observation,
    StayGoodAgent,
    TruthfulAgent,
    expert_grid,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .mechanism import AvgBidLedger, AvgBidMechanism, CreditLedger, CreditMechanism, make_mechanism, r_target
from .simulator import RevenueReport, Trajectory, run_experiment, run_trajectory
from .valuation import MoneyGrid, ValuationDistribution, make_distribution

__all__ = [
    "AvgBidLedger",
    "AvgBidMechanism",
    "ConfigError",
    "CreditLedger",
    "CreditMechanism",
    "EtcAgent",
    "Exp3Agent",
    "ExperimentConfig",
    "Expert",
    "LookaheadAgent",
    "MoneyGrid",
    "MyopicAgent",
    "Observation",
    "RevenueReport",
    "StayGoodAgent",
    "Trajectory",
    "TruthfulAgent",
    "ValuationDistribution",
    "expert_grid",
    "make_distribution",
    "make_mechanism",
    "parse_config",
    "r_target",
    "run_experiment",
    "run_trajectory",
]
