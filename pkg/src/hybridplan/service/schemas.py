"""Request and response models shared by the TCP and HTTP front ends."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Fleet(BaseModel):
    n_vm: int = Field(ge=0)
    n_sl: int = Field(ge=0)


class PlanRequestModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    query_text: Optional[str] = None
    query_id: Optional[str] = None
    n_map_tasks: int = Field(0, ge=0)
    input_size_bytes: Optional[float] = Field(None, ge=0)
    epsilon: Optional[float] = Field(None, ge=0)
    relay: Optional[bool] = None
    seed: int = 0

    @model_validator(mode="after")
    def one_query_reference(self):
        if (self.query_text is None) == (self.query_id is None):
            raise ValueError("exactly one of query_text and query_id is required")
        return self


class PlanResponseModel(BaseModel):
    fleet: Fleet
    predicted_time_s: float
    estimated_cost: str
    matched_query_id: str
    similarity_score: float = Field(ge=0, le=1)
    search_evaluations: int
    model_version: int
    t_best_s: float
    c_best: str
    terminated_by: str
    relay: bool


class ExecuteRequestModel(PlanRequestModel):
    n_tasks: Optional[int] = Field(None, ge=0)
    task_service_s: float = Field(2.0, gt=0)


class DriftModel(BaseModel):
    query_id: str
    predicted_s: float
    actual_s: float
    abs_error_s: float
    triggered: bool


class ExecuteResponseModel(BaseModel):
    plan: PlanResponseModel
    completion_s: float
    total_cost: str
    tasks_on_sl: int
    tasks_on_vm: int
    drift: DriftModel


class StatusModel(BaseModel):
    model_version: int
    known_queries: list[str]
    retrains_completed: int
    retrains_failed: int
    retrain_running: bool
