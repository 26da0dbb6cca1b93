"""Performance-cost comparison of three fleet search strategies.

* RF+BO: Bayesian search whose probes are forest predictions.
* RF-exhaustive: a forest prediction for every grid fleet.
* BO-on-simulator: Bayesian search whose probes are full (simulated) runs.

Search time and cost are modeled so that results are reproducible: a
forest probe takes ``predict_call_s`` on a planner host billed at
``host_hourly_price``, each surrogate refit adds ``surrogate_step_s``, and
a simulator probe costs what the run itself costs.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .domain import ProviderProfile, QueryFeatures, to_money
from .forest import PredictionModel
from .optimizer import exhaustive, fleet_grid, bayes_search, pc_ratio, search
from .simulator import Policy, QuerySpec, simulate


@dataclass(frozen=True)
class CompareSettings:
    predict_call_s: float = 0.05
    surrogate_step_s: float = 0.01
    host_hourly_price: Decimal = Decimal("0.1664")
    n_initial: int = 5

    def host_cost(self, seconds: float) -> Decimal:
        return to_money(self.host_hourly_price * Decimal(repr(seconds)) / 3600)


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    fleet: tuple[int, int]
    evaluations: int
    search_time_s: float
    search_cost: Decimal
    pc_r: float
    actual_completion_s: float

    def row(self) -> list:
        return [self.strategy, self.fleet[0], self.fleet[1], self.evaluations,
                f"{self.search_time_s:.3f}", self.search_cost, f"{self.pc_r:.6f}",
                f"{self.actual_completion_s:.3f}"]


COMPARE_HEADER = ("strategy", "n_vm", "n_sl", "evaluations", "search_time_s", "search_cost", "pc_r",
                  "actual_completion_s")


def compare(model: PredictionModel, base: QueryFeatures, query: QuerySpec, profile: ProviderProfile,
            seed: int = 0, relay: bool = True, settings: CompareSettings = CompareSettings()) -> list[StrategyResult]:
    policy = Policy.relay(relay)

    def actual(fleet):
        return simulate(query, fleet, policy, profile).completion_s

    rows = []

    bo = search(model, base, profile, seed=seed, relay=relay, n_initial=settings.n_initial)
    n_refits = max(0, bo.n_evaluations - settings.n_initial)
    t = bo.n_evaluations * settings.predict_call_s + n_refits * settings.surrogate_step_s
    c = settings.host_cost(t)
    rows.append(StrategyResult("RF+BO", bo.best.fleet.as_tuple(), bo.n_evaluations, t, c, pc_ratio(t, c),
                               actual(bo.best.fleet)))

    ex = exhaustive(model, base, profile, relay=relay)
    t = ex.n_evaluations * settings.predict_call_s
    c = settings.host_cost(t)
    rows.append(StrategyResult("RF-exhaustive", ex.best.fleet.as_tuple(), ex.n_evaluations, t, c,
                               pc_ratio(t, c), actual(ex.best.fleet)))

    runs = {}

    def run(fleet):
        out = simulate(query, fleet, policy, profile)
        runs[fleet] = out
        return -out.completion_s

    fleets, values, _, _ = bayes_search(run, fleet_grid(profile.max_vm, profile.max_sl), seed=seed,
                                        n_initial=settings.n_initial)
    best = fleets[max(range(len(values)), key=lambda i: values[i])]
    t = sum(o.completion_s for o in runs.values())
    c = sum((o.cost.total for o in runs.values()), Decimal("0"))
    rows.append(StrategyResult("BO-on-simulator", best.as_tuple(), len(fleets), t, c, pc_ratio(t, c),
                               runs[best].completion_s))
    return rows
