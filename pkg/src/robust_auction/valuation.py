"""Discrete value distributions on a money grid.

Money is represented as an integer number of ticks.  Grid point ``k`` has
value ``k * tick``; every distribution lives on ``0, tick, ..., B``.  Means,
tails and Myerson statistics are computed with exact ``Fraction`` arithmetic so
that downstream state predicates never suffer float drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

PMF_TOLERANCE = 1e-12


def as_fraction(x: Any) -> Fraction:
    """Convert user input to an exact Fraction, reading floats by their decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


@dataclass(frozen=True)
class MoneyGrid:
    tick: Fraction
    max_value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "tick", as_fraction(self.tick))
        object.__setattr__(self, "max_value", as_fraction(self.max_value))
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        if self.max_value < self.tick:
            raise ValueError("max_value must be at least one tick")
        if (self.max_value / self.tick).denominator != 1:
            raise ValueError(f"max_value {self.max_value} is not a multiple of tick {self.tick}")

    @property
    def n_ticks(self) -> int:
        return int(self.max_value / self.tick)

    @property
    def size(self) -> int:
        return self.n_ticks + 1

    def to_ticks(self, money) -> int:
        q = as_fraction(money) / self.tick
        if q.denominator != 1:
            raise ValueError(f"{money} is not on the grid (tick {self.tick})")
        return int(q)

    def to_money(self, ticks) -> Fraction:
        return ticks * self.tick

    def on_grid(self, money) -> bool:
        q = as_fraction(money) / self.tick
        return q.denominator == 1 and 0 <= q <= self.n_ticks

    def values(self) -> list[Fraction]:
        return [k * self.tick for k in range(self.size)]


@dataclass(frozen=True)
class MyersonStats:
    price: Fraction
    revenue: Fraction
    tail_at_price: Fraction


@dataclass(frozen=True, eq=False)
class ValuationDistribution:
    """A pmf over the grid points ``0..n_ticks`` (index == value in ticks)."""

    grid: MoneyGrid
    pmf: tuple[Fraction, ...]

    def __post_init__(self):
        pmf = tuple(as_fraction(p) for p in self.pmf)
        if len(pmf) != self.grid.size:
            raise ValueError(f"pmf has {len(pmf)} entries, grid has {self.grid.size} points")
        if any(p < 0 for p in pmf):
            raise ValueError("pmf entries must be nonnegative")
        total = sum(pmf)
        if abs(total - 1) > PMF_TOLERANCE:
            raise ValueError(f"pmf sums to {float(total)!r}, not 1")
        if total != 1:
            # inputs within tolerance are renormalised so that sums stay exact
            pmf = tuple(p / total for p in pmf)
        object.__setattr__(self, "pmf", pmf)

    def __eq__(self, other):
        if not isinstance(other, ValuationDistribution):
            return NotImplemented
        return self.grid == other.grid and self.pmf == other.pmf

    def __hash__(self):
        return self._hash

    @cached_property
    def _hash(self) -> int:
        return hash((self.grid, self.pmf))

    @property
    def tick(self) -> Fraction:
        return self.grid.tick

    @cached_property
    def mean(self) -> Fraction:
        return self.grid.tick * sum(k * p for k, p in enumerate(self.pmf))

    @cached_property
    def _tails(self) -> tuple[Fraction, ...]:
        tails = [Fraction(0)] * (self.grid.size + 1)
        for k in range(self.grid.size - 1, -1, -1):
            tails[k] = tails[k + 1] + self.pmf[k]
        return tuple(tails)

    def tail(self, p) -> Fraction:
        """Pr(v >= p) for a grid price ``p`` (money)."""
        return self.tail_ticks(self.grid.to_ticks(p))

    def tail_ticks(self, k: int) -> Fraction:
        if k < 0:
            raise ValueError("negative price")
        return self._tails[min(k, self.grid.size)]

    @cached_property
    def myerson(self) -> MyersonStats:
        best_k, best_rev = 0, Fraction(0)
        for k in range(self.grid.size):
            rev = k * self.grid.tick * self._tails[k]
            if rev > best_rev:  # strict: ties keep the lowest price
                best_k, best_rev = k, rev
        return MyersonStats(best_k * self.grid.tick, best_rev, self._tails[best_k])

    @cached_property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.pmf) if p > 0)

    @cached_property
    def pmf_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.pmf])

    @cached_property
    def cdf_array(self) -> np.ndarray:
        cdf = np.cumsum(self.pmf_array)
        cdf[-1] = 1.0
        # trailing zero-mass points must never be selected
        last = self.support[-1]
        cdf[last:] = 1.0
        return cdf

    def sample_ticks(self, rng: np.random.Generator, size: int | None = None):
        """Inverse-cdf sampling; one uniform per draw, so scalar and bulk draws agree."""
        if size is None:
            return int(np.searchsorted(self.cdf_array, rng.random(), side="right"))
        return np.searchsorted(self.cdf_array, rng.random(size), side="right").astype(np.int64)

    def sample(self, rng: np.random.Generator) -> Fraction:
        return self.sample_ticks(rng) * self.grid.tick


def mean(dist: ValuationDistribution) -> Fraction:
    return dist.mean


def tail(dist: ValuationDistribution, p) -> Fraction:
    return dist.tail(p)


def myerson(dist: ValuationDistribution) -> MyersonStats:
    return dist.myerson


def sample(dist: ValuationDistribution, rng: np.random.Generator) -> Fraction:
    return dist.sample(rng)


def _float_masses_to_fractions(masses: Sequence[float]) -> list[Fraction]:
    fr = [Fraction(m) for m in masses]
    total = sum(fr)
    return [m / total for m in fr]


DIST_KEYS = {
    "uniform": {"kind", "B", "tick"},
    "exponential": {"kind", "B", "tick", "rate"},
    "equal_revenue": {"kind", "H", "tick"},
    "point": {"kind", "value", "B", "tick"},
    "explicit": {"kind", "B", "tick", "pmf"},
}


def make_distribution(spec: Mapping[str, Any]) -> ValuationDistribution:
    """Build a distribution from a config sub-document.

    Continuous families are discretised by moving the mass of ``[v, v + tick)``
    onto grid point ``v``.
    """
    kind = spec.get("kind", "uniform")
    if kind not in DIST_KEYS:
        raise ValueError(f"unknown distribution kind {kind!r}")
    unknown = set(spec) - DIST_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown keys for {kind} distribution: {sorted(unknown)}")
    tick = as_fraction(spec.get("tick", "0.01"))

    if kind == "uniform":
        grid = MoneyGrid(tick, spec.get("B", 1))
        return ValuationDistribution(grid, (Fraction(1, grid.size),) * grid.size)

    if kind == "point":
        grid = MoneyGrid(tick, spec.get("B", spec["value"]))
        k = grid.to_ticks(spec["value"])
        if not 0 <= k <= grid.n_ticks:
            raise ValueError("point mass outside support")
        pmf = [Fraction(0)] * grid.size
        pmf[k] = Fraction(1)
        return ValuationDistribution(grid, tuple(pmf))

    if kind == "explicit":
        grid = MoneyGrid(tick, spec["B"])
        return ValuationDistribution(grid, tuple(as_fraction(p) for p in spec["pmf"]))

    if kind == "equal_revenue":
        # density 1/v^2 on [1, H) plus an atom 1/H at H
        H = as_fraction(spec["H"])
        grid = MoneyGrid(tick, H)
        if H < 1:
            raise ValueError("equal-revenue support needs H >= 1")
        pmf = [Fraction(0)] * grid.size
        lo = grid.to_ticks(1)
        for k in range(lo, grid.n_ticks):
            v = k * tick
            pmf[k] = 1 / v - 1 / (v + tick)
        pmf[grid.n_ticks] += 1 / H
        return ValuationDistribution(grid, tuple(pmf))

    # truncated exponential on [0, B]
    grid = MoneyGrid(tick, spec.get("B", 1))
    rate = float(spec.get("rate", 1.0))
    if rate <= 0:
        raise ValueError("rate must be positive")
    t = float(tick)
    masses = [math.exp(-rate * k * t) - math.exp(-rate * (k + 1) * t) for k in range(grid.n_ticks)]
    masses.append(0.0)
    return ValuationDistribution(grid, tuple(_float_masses_to_fractions(masses)))
