"""Bayesian-optimization search over fleet configurations.

The objective is the negated predicted completion time. A GP surrogate is
refit after every probe and the unvisited fleet with the highest
probability of improvement is evaluated next.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Sequence

import numpy as np

from .domain import FleetConfig, ProviderProfile, QueryFeatures, to_money
from .errors import DomainError, SearchConfigError
from .forest import PredictionModel
from .gp import GpSurrogate, log_probability_of_improvement, probability_of_improvement

STAGNATION_PATIENCE = 10
MIN_RELATIVE_GAIN = 0.01
XI_FRACTION = 0.01


class Termination(str, enum.Enum):
    STAGNATION = "STAGNATION"
    BUDGET = "BUDGET"


@dataclass(frozen=True)
class Candidate:
    fleet: FleetConfig
    est_time_s: float
    est_cost: Decimal

    def as_dict(self) -> dict:
        return {"fleet": {"n_vm": self.fleet.n_vm, "n_sl": self.fleet.n_sl},
                "est_time_s": self.est_time_s, "est_cost": str(self.est_cost)}


@dataclass(frozen=True)
class SearchResult:
    best: Candidate
    visited: tuple[Candidate, ...]
    n_evaluations: int
    terminated_by: Termination
    objective_trace: tuple[float, ...] = ()  # best objective after each evaluation


def estimate_cost(fleet: FleetConfig, est_time_s: float, profile: ProviderProfile,
                  relay: bool = True, grace_s: float = 0.0) -> Decimal:
    """Per-second cost estimate of running ``fleet`` for ``est_time_s``.

    Under relay only the SLs paired with a VM stop at the VM boot time;
    unpaired SLs keep working for the whole query.
    """
    if est_time_s < 0:
        raise DomainError("est_time_s must be >= 0")
    t = Decimal(repr(float(est_time_s)))
    vm = fleet.n_vm * t * profile.vm_hourly_total / 3600
    if fleet.n_sl == 0:
        return to_money(vm)
    paired = min(fleet.n_vm, fleet.n_sl) if relay else 0
    t_paired = min(t, Decimal(repr(profile.vm_cold_boot_s + grace_s)))
    sl_seconds = paired * t_paired + (fleet.n_sl - paired) * t
    sl = sl_seconds * profile.sl_rate_per_s
    external = t * profile.external_store_hourly_price / 3600
    return to_money(vm + sl + external)


def objective(model: PredictionModel, base: QueryFeatures, fleet: FleetConfig,
              noise_std: float = 0.0, seed: int = 0) -> float:
    """``-(RF_t + delta)`` with ``delta ~ N(0, noise_std^2)`` drawn from ``seed``."""
    rf_t = model.predict(base.with_fleet(fleet))
    delta = np.random.default_rng(seed).normal(0.0, noise_std) if noise_std > 0 else 0.0
    return -(rf_t + delta)


def acquisition_pi(surrogate: GpSurrogate, candidate: FleetConfig, f_best: float, xi: float) -> float:
    mu, sigma = surrogate.predict([candidate.as_tuple()])
    return float(probability_of_improvement(mu, sigma, f_best, xi)[0])


def fleet_grid(max_vm: int, max_sl: int) -> list[FleetConfig]:
    return [FleetConfig(v, s) for v in range(max_vm + 1) for s in range(max_sl + 1) if v + s > 0]


def initial_design(grid: Sequence[FleetConfig], n_initial: int, rng: np.random.Generator) -> list[FleetConfig]:
    """Both extremes plus distinct uniform picks from the rest of the grid."""
    max_vm = max(f.n_vm for f in grid)
    max_sl = max(f.n_sl for f in grid)
    design = []
    for f in (FleetConfig(0, max_sl), FleetConfig(max_vm, 0)):
        if f in grid and f not in design and len(design) < n_initial:
            design.append(f)
    rest = [f for f in grid if f not in design]
    k = min(n_initial - len(design), len(rest))
    if k > 0:
        design.extend(rest[int(i)] for i in rng.choice(len(rest), size=k, replace=False))
    return design


def _relative_gain(new: float, old: float) -> float:
    if new == old:
        return 0.0
    return (new - old) / max(abs(old), 1e-12)


def bayes_search(evaluate: Callable[[FleetConfig], float], grid: Sequence[FleetConfig],
                 budget: int | None = None, seed: int = 0, n_initial: int = 5,
                 on_visit: Callable[[FleetConfig, float], None] | None = None):
    """Maximize ``evaluate`` over ``grid``.

    Returns ``(visited fleets, objective values, termination, best trace)``.
    """
    grid = list(grid)
    if not grid:
        raise SearchConfigError("empty search grid")
    budget = len(grid) if budget is None else budget
    n_initial = min(n_initial, len(grid))
    if budget < n_initial:
        raise SearchConfigError(f"budget {budget} is smaller than the initial design ({n_initial})")
    budget = min(budget, len(grid))
    rng = np.random.default_rng(seed)

    fleets: list[FleetConfig] = []
    values: list[float] = []
    trace: list[float] = []

    def probe(f):
        v = float(evaluate(f))
        fleets.append(f)
        values.append(v)
        trace.append(max(values))
        if on_visit is not None:
            on_visit(f, v)

    for f in initial_design(grid, n_initial, rng):
        probe(f)

    coords = np.array([f.as_tuple() for f in grid], dtype=float)
    stagnant = 0
    while True:
        if stagnant >= STAGNATION_PATIENCE:
            return fleets, values, Termination.STAGNATION, trace
        if len(fleets) >= budget:
            return fleets, values, Termination.BUDGET, trace
        seen = set(fleets)
        open_idx = [i for i, f in enumerate(grid) if f not in seen]
        gp = GpSurrogate().fit([f.as_tuple() for f in fleets], values)
        mu, sigma = gp.predict(coords[open_idx])
        f_best = max(values)
        score = log_probability_of_improvement(mu, sigma, f_best, XI_FRACTION * abs(f_best))
        if np.all(np.isneginf(score)):
            # No candidate can improve; fall back to the most uncertain one.
            score = sigma
        pick = open_idx[int(np.argmax(score))]
        old_best = f_best
        probe(grid[pick])
        if _relative_gain(max(values), old_best) < MIN_RELATIVE_GAIN:
            stagnant += 1
        else:
            stagnant = 0


def search(model: PredictionModel, base: QueryFeatures, profile: ProviderProfile,
           budget: int | None = None, seed: int = 0, relay: bool = True,
           noise_std: float = 0.0, n_initial: int = 5) -> SearchResult:
    """BO over the profile's fleet bounds using the forest as the objective."""
    grid = fleet_grid(profile.max_vm, profile.max_sl)
    noiseless: dict[FleetConfig, float] = {}

    def evaluate(f):
        rf_t = model.predict(base.with_fleet(f))
        noiseless[f] = rf_t
        if noise_std > 0:
            delta = np.random.default_rng([seed, f.n_vm, f.n_sl]).normal(0.0, noise_std)
            return -(rf_t + delta)
        return -rf_t

    fleets, _, term, trace = bayes_search(evaluate, grid, budget, seed, n_initial)
    visited = tuple(Candidate(f, noiseless[f], estimate_cost(f, noiseless[f], profile, relay)) for f in fleets)
    return SearchResult(best_of(visited), visited, len(visited), term, tuple(trace))


def best_of(visited: Sequence[Candidate]) -> Candidate:
    """Fastest candidate; ties go to the cheaper, then the earlier one."""
    return min(visited, key=lambda c: (c.est_time_s, c.est_cost))


def exhaustive(model: PredictionModel, base: QueryFeatures, profile: ProviderProfile,
               relay: bool = True) -> SearchResult:
    grid = fleet_grid(profile.max_vm, profile.max_sl)
    times = model.predict_many([base.with_fleet(f).vector() for f in grid])
    visited = tuple(Candidate(f, float(t), estimate_cost(f, float(t), profile, relay)) for f, t in zip(grid, times))
    return SearchResult(best_of(visited), visited, len(visited), Termination.BUDGET)


def select_with_knob(result: SearchResult, epsilon: float) -> Candidate:
    """Cheapest candidate with time <= ``(1 + epsilon) * T_best`` and cost <= ``C_best``.

    Ties in cost go to the slower candidate, which leaves the faster ones for
    other jobs. Because the feasible set only grows with ``epsilon``, the
    chosen cost never increases as the knob is loosened.
    """
    if epsilon < 0 or math.isnan(epsilon):
        raise DomainError("epsilon must be >= 0")
    t_best = result.best.est_time_s
    c_best = result.best.est_cost
    limit = t_best * (1.0 + epsilon)
    ok = [c for c in result.visited if c.est_cost <= c_best and c.est_time_s <= limit]
    if not ok:
        return result.best
    return min(ok, key=lambda c: (c.est_cost, -c.est_time_s))


def pc_ratio(time_s: float, cost) -> float:
    """Performance-cost ratio ``100 * (1/time) / (1 + cost)``."""
    if not time_s > 0:
        raise DomainError("time_s must be > 0")
    cost = float(cost)
    if cost < 0:
        raise DomainError("cost must be >= 0")
    return 100.0 * (1.0 / time_s) / (1.0 + cost)
