"""Revenue-tradeoff frontier sweeps and closed-form bound tables."""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .config import ExperimentConfig
from .simulator import run_experiment
from .valuation import ValuationDistribution

FRONTIER_COLUMNS = (
    "epsilon",
    "rho",
    "alpha_hat",
    "alpha_ci",
    "beta_hat",
    "beta_ci",
    "alpha_theory",
    "beta_theory",
    "impossibility_beta",
)

# half-width of the reported intervals, in standard errors
CI_WIDTH = 3.0


def frontier_rho(epsilon) -> Fraction:
    eps = Fraction(str(epsilon))
    return eps / (2 - eps)


@dataclass(frozen=True)
class FrontierPoint:
    epsilon: float
    rho: float
    alpha_hat: float
    alpha_ci: float
    beta_hat: float
    beta_ci: float
    alpha_theory: float
    beta_theory: float
    regime: dict

    @property
    def impossibility_beta(self) -> float:
        """Largest beta compatible with the measured alpha: 1 - alpha/2."""
        return 1 - self.alpha_hat / 2

    def below_impossibility(self) -> bool:
        return self.beta_hat <= self.impossibility_beta + self.beta_ci + self.alpha_ci / 2

    def row(self) -> dict:
        return {name: getattr(self, name) for name in FRONTIER_COLUMNS}


def frontier_sweep(eps_list: Iterable[float], base_config: ExperimentConfig) -> list[FrontierPoint]:
    """Per epsilon (with rho = eps / (2 - eps)) run a myopic and a stay-good experiment."""
    points = []
    for eps in eps_list:
        rho = frontier_rho(eps)
        runs = {}
        for agent in ("myopic", "stay_good"):
            cfg = copy.deepcopy(base_config)
            cfg.mechanism.kind = "mep"
            cfg.mechanism.epsilon = str(eps)
            cfg.mechanism.rho = str(rho)
            cfg.agent.kind = agent
            cfg.trace = None
            runs[agent] = run_experiment(cfg)
        dist = base_config.build_distribution()
        rev_mye = float(dist.myerson.revenue)
        mu = float(dist.mean)
        my, sg = runs["myopic"], runs["stay_good"]
        points.append(
            FrontierPoint(
                epsilon=float(eps),
                rho=float(rho),
                alpha_hat=my.mean_revenue / rev_mye,
                alpha_ci=CI_WIDTH * my.stderr / rev_mye,
                beta_hat=sg.mean_revenue / mu,
                beta_ci=CI_WIDTH * sg.stderr / mu,
                alpha_theory=float(eps) / 2,
                beta_theory=1 - float(eps),
                regime=my.regime,
            )
        )
    return points


def write_frontier_csv(points: Sequence[FrontierPoint], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=FRONTIER_COLUMNS)
    w.writeheader()
    for p in points:
        w.writerow(p.row())


@dataclass(frozen=True)
class ExPostBound:
    k: int
    mu: float
    bound: float
    full_surplus: float
    vacuous: bool


def expost_bound(k: int, mu: float) -> float:
    """Revenue cap ln(k * mu) + 1 for per-round ex-post IR k-lookahead buyers."""
    return math.log(k * mu) + 1


def expost_bound_table(k_list: Iterable[int], dist_or_mu) -> list[ExPostBound]:
    mu = float(dist_or_mu.mean if isinstance(dist_or_mu, ValuationDistribution) else dist_or_mu)
    if mu <= 0:
        raise ValueError("mu must be positive")
    rows = []
    for k in k_list:
        if k < 1:
            raise ValueError("k must be >= 1")
        rows.append(ExPostBound(k, mu, expost_bound(k, mu), mu, k * mu < 1))
    return rows


def write_bounds_csv(rows: Sequence[ExPostBound], fh) -> None:
    w = csv.writer(fh)
    w.writerow(["k", "mu", "bound", "full_surplus", "vacuous"])
    for r in rows:
        w.writerow([r.k, repr(r.mu), repr(r.bound), repr(r.full_surplus), int(r.vacuous)])
