"""HTTP front end exposing the same operations as the line protocol."""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import ModelStateError, PlannerError
from .core import PlannerService
from .schemas import ExecuteRequestModel, ExecuteResponseModel, PlanRequestModel, PlanResponseModel, StatusModel


def create_app(service: PlannerService) -> FastAPI:
    app = FastAPI(title="hybridplan", version="0.1.0")

    @app.exception_handler(PlannerError)
    async def planner_error(request: Request, exc: PlannerError):
        code = 503 if isinstance(exc, ModelStateError) else 400
        return JSONResponse(status_code=code, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.get("/status", response_model=StatusModel)
    def status():
        return service.status()

    @app.post("/plan", response_model=PlanResponseModel)
    def plan(req: PlanRequestModel):
        return service.plan(req.model_dump())

    @app.post("/execute", response_model=ExecuteResponseModel)
    def execute(req: ExecuteRequestModel):
        return service.execute(req.model_dump())

    return app
