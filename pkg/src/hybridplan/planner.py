"""End-to-end planning workflow: routing, feature assembly, search, knob, recording."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal

from .domain import FEATURE_ORDER, EngineConfig, FleetConfig, ProviderProfile, QueryFeatures, WorkloadSample
from .dynamics import DriftEvent, ModelHolder, RetrainMonitor, check_trigger
from .errors import NoKnownQueriesError, PlanningError, UnparseableQueryError
from .history import TraceDataset
from .optimizer import SearchResult, search, select_with_knob
from .simulator import Policy, QuerySpec, SimOutcome, simulate
from .similarity import StructuralSignature, extract_signature, nearest_known

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanRequest:
    query_text: str | None = None
    query_id: str | None = None
    n_map_tasks: int = 0
    input_size_bytes: float | None = None
    epsilon: float | None = None
    relay: bool | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.query_text is None) == (self.query_id is None):
            raise PlanningError("exactly one of query_text and query_id is required")


@dataclass(frozen=True)
class PlanResponse:
    fleet: FleetConfig
    predicted_time_s: float
    estimated_cost: Decimal
    matched_query_id: str
    similarity_score: float
    search_evaluations: int
    model_version: int
    t_best_s: float = 0.0
    c_best: Decimal = Decimal("0")
    terminated_by: str = ""
    relay: bool = True
    features: QueryFeatures | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "fleet": {"n_vm": self.fleet.n_vm, "n_sl": self.fleet.n_sl},
            "predicted_time_s": self.predicted_time_s,
            "estimated_cost": str(self.estimated_cost),
            "matched_query_id": self.matched_query_id,
            "similarity_score": self.similarity_score,
            "search_evaluations": self.search_evaluations,
            "model_version": self.model_version,
            "t_best_s": self.t_best_s,
            "c_best": str(self.c_best),
            "terminated_by": self.terminated_by,
            "relay": self.relay,
        }


class Planner:
    """Stateful planner around the served model, history and drift monitor."""

    def __init__(self, holder: ModelHolder, profile: ProviderProfile, config: EngineConfig = EngineConfig(),
                 history: TraceDataset | None = None, monitor: RetrainMonitor | None = None):
        self.holder = holder
        self.profile = profile
        self.config = config
        self.history = history
        self.monitor = monitor

    def route(self, request: PlanRequest, registry: dict) -> tuple[str, float]:
        if request.query_id is not None and request.query_id in registry:
            return request.query_id, 1.0
        if request.query_text is None:
            raise PlanningError(f"unknown query id {request.query_id!r} and no query text to match")
        try:
            sig = extract_signature(request.query_text, request.n_map_tasks)
            return nearest_known(sig, registry)
        except (UnparseableQueryError, NoKnownQueriesError) as exc:
            raise PlanningError(f"cannot route alien query: {exc}") from exc

    def base_features(self, matched_id: str, model, request: PlanRequest) -> QueryFeatures:
        """Latest observed features of the matched workload, else training medians."""
        recent = self.history.latest_features_for(matched_id, 1) if self.history is not None else []
        if recent:
            base = recent[0].features
        else:
            med = model.training_stats.get("feature_medians")
            if not med:
                raise PlanningError(f"no history for {matched_id!r} and no training medians")
            base = QueryFeatures(*(float(med[k]) for k in FEATURE_ORDER), query_id=matched_id)
        if request.input_size_bytes is not None:
            base = replace(base, input_size=float(request.input_size_bytes))
        return replace(base, query_id=matched_id)

    def plan(self, request: PlanRequest) -> PlanResponse:
        model = self.holder.get()  # one snapshot for the whole call
        matched, score = self.route(request, model.known_queries)
        base = self.base_features(matched, model, request)
        relay = self.config.compute_relay if request.relay is None else request.relay
        epsilon = self.config.compute_knob if request.epsilon is None else request.epsilon
        result: SearchResult = search(model, base, self.profile, seed=request.seed, relay=relay)
        chosen = select_with_knob(result, epsilon)
        return PlanResponse(
            fleet=chosen.fleet,
            predicted_time_s=chosen.est_time_s,
            estimated_cost=chosen.est_cost,
            matched_query_id=matched,
            similarity_score=score,
            search_evaluations=result.n_evaluations,
            model_version=model.version,
            t_best_s=result.best.est_time_s,
            c_best=result.best.est_cost,
            terminated_by=result.terminated_by.value,
            relay=relay,
            features=base.with_fleet(chosen.fleet),
        )

    def execute_and_record(self, response: PlanResponse, query: QuerySpec) -> tuple[SimOutcome, DriftEvent]:
        """Simulate the plan, append the observed run to history and check for drift."""
        policy = Policy.relay(response.relay)
        outcome = simulate(query, response.fleet, policy, self.profile)
        features = response.features
        if features is None:
            raise PlanningError("response carries no features to record")
        if self.history is not None and outcome.completion_s > 0:
            self.history.append(WorkloadSample(features, outcome.completion_s))
        event = check_trigger(response.predicted_time_s, outcome.completion_s,
                              self.config.train_error_difference_trigger_s, response.matched_query_id)
        if self.monitor is not None:
            self.monitor.observe(event)
        return outcome, event


def signature_registry(entries: dict) -> dict[str, StructuralSignature]:
    return {k: v if isinstance(v, StructuralSignature) else StructuralSignature.from_dict(v)
            for k, v in entries.items()}
