"""Transport-neutral planner service: validated dict in, dict out."""
from __future__ import annotations

import math
from pathlib import Path

from ..config import load_config, resolve_profile
from ..domain import EngineConfig, ProviderProfile
from ..dynamics import AuditLog, ModelHolder, RetrainMonitor
from ..errors import PlanningError
from ..forest import Hyper, ModelStore
from ..history import TraceDataset
from ..planner import Planner, PlanRequest
from ..simulator import QuerySpec
from ..workloads import BYTES_PER_TASK
from .schemas import (ExecuteRequestModel, ExecuteResponseModel, PlanRequestModel, PlanResponseModel,
                      StatusModel)


class PlannerService:
    def __init__(self, planner: Planner, monitor: RetrainMonitor | None = None):
        self.planner = planner
        self.monitor = monitor

    @classmethod
    def from_paths(cls, model_dir, history_path, profile: str | ProviderProfile = "aws-sim",
                   config_path=None, hyper: Hyper = Hyper()) -> "PlannerService":
        config = load_config(config_path) if config_path else EngineConfig()
        if isinstance(profile, str):
            profile = resolve_profile(profile)
        store = ModelStore(model_dir)
        holder = ModelHolder(store.load())
        history = TraceDataset(history_path)
        audit = AuditLog(Path(history_path).with_name("drift.jsonl"))
        monitor = RetrainMonitor(holder, history, config, store=store, audit=audit, hyper=hyper)
        return cls(Planner(holder, profile, config, history, monitor), monitor)

    @staticmethod
    def _to_request(m: PlanRequestModel) -> PlanRequest:
        return PlanRequest(m.query_text, m.query_id, m.n_map_tasks, m.input_size_bytes, m.epsilon, m.relay, m.seed)

    def plan(self, payload: dict) -> dict:
        req = PlanRequestModel.model_validate(payload)
        resp = self.planner.plan(self._to_request(req))
        return PlanResponseModel.model_validate(resp.as_dict()).model_dump()

    def execute(self, payload: dict) -> dict:
        req = ExecuteRequestModel.model_validate(payload)
        n_tasks = req.n_tasks or req.n_map_tasks
        if not n_tasks and req.input_size_bytes:
            n_tasks = max(1, math.ceil(req.input_size_bytes / BYTES_PER_TASK))
        if not n_tasks:
            raise PlanningError("execute needs n_tasks, n_map_tasks or input_size_bytes")
        resp = self.planner.plan(self._to_request(req))
        outcome, event = self.planner.execute_and_record(resp, QuerySpec(n_tasks, req.task_service_s))
        return ExecuteResponseModel.model_validate({
            "plan": resp.as_dict(),
            "completion_s": outcome.completion_s,
            "total_cost": str(outcome.cost.total),
            "tasks_on_sl": outcome.tasks_on_sl,
            "tasks_on_vm": outcome.tasks_on_vm,
            "drift": {"query_id": event.query_id, "predicted_s": event.predicted_s, "actual_s": event.actual_s,
                      "abs_error_s": event.abs_error_s, "triggered": event.triggered},
        }).model_dump()

    def status(self, payload: dict | None = None) -> dict:
        holder = self.planner.holder
        known = sorted(holder.get().known_queries) if holder.version else []
        mon = self.monitor
        return StatusModel(
            model_version=holder.version,
            known_queries=known,
            retrains_completed=mon.completed if mon else 0,
            retrains_failed=mon.failed if mon else 0,
            retrain_running=mon.busy if mon else False,
        ).model_dump()

    def dispatch(self, op: str, payload: dict | None) -> dict:
        handlers = {"plan": self.plan, "execute": self.execute, "status": self.status}
        if op not in handlers:
            raise PlanningError(f"unknown op {op!r}; expected one of {', '.join(handlers)}")
        return handlers[op](payload or {})
