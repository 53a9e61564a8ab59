"""HTTP service: registration, routing, execution, and state inspection.

Every response body is JSON and carries ``schema_version``. Request schema
violations map to 400 with a machine-readable error code; routing and
dispatch failures map to 502-class codes carrying the executor's error
taxonomy.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import (
    BudgetExceededError,
    ExpertNotFoundError,
    RouterError,
    TransportError,
    ValidationError,
)
from .executor import ExecutionResult
from .stack import ServiceStack
from .tasks import TaskInstruction

SCHEMA_VERSION = 1

_BAD_REQUEST_CODES = {
    "validation_error",
    "duplicate_expert",
    "dimension_mismatch",
    "schema_error",
    "parse_error",
    "extraction_error",
    "budget_exceeded",
    "empty_pool",
    "cache_invalid",
    "config_error",
}


def _status_for(error: RouterError) -> int:
    if isinstance(error, ExpertNotFoundError):
        return 404
    if isinstance(error, (ValidationError, BudgetExceededError)):
        return 400
    if error.code in _BAD_REQUEST_CODES:
        return 400
    if isinstance(error, TransportError):
        return 502
    # routing_failed, no_expert_selected, protocol_error, unparsable_response
    return 502


def _envelope(payload: dict[str, Any]) -> dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, **payload}


class RegisterRequest(BaseModel):
    name: str
    meta_simple: str
    meta_abstract: str
    category_label: str
    adapter_id: str
    adapter_size_bytes: int
    endpoint: str


class RouteRequest(BaseModel):
    text: str
    strategy: str | None = None
    style: str | None = None


class ExecuteRequest(BaseModel):
    task_id: str
    text: str
    strategy: str | None = None
    style: str | None = None


class BatchTask(BaseModel):
    task_id: str
    text: str


class ExecuteBatchRequest(BaseModel):
    tasks: list[BatchTask] = Field(default_factory=list)
    batching: bool = True
    strategy: str | None = None
    style: str | None = None


def create_app(stack: ServiceStack) -> FastAPI:
    app = FastAPI(title="moe-router", version=__version__)
    config = stack.config

    if len(stack.registry) > 0:
        # warm the meta-description caches so first-request latency is flat
        for style in ("simple", "abstract"):
            stack.similarity_router.cache_for(style)

    @app.exception_handler(RouterError)
    async def router_error_handler(_request: Request, exc: RouterError):
        return JSONResponse(
            status_code=_status_for(exc),
            content=_envelope({"error": {"code": exc.code, "message": str(exc)}}),
        )

    @app.exception_handler(RequestValidationError)
    async def schema_error_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content=_envelope(
                {"error": {"code": "validation_error", "message": str(exc.errors())}}
            ),
        )

    @app.post("/experts")
    def register_expert(body: RegisterRequest):
        # budget first: the registry is append-only, so nothing may be
        # stored unless the adapter also fits the serving budget
        stack.manager.check_admissible(body.adapter_size_bytes)
        expert_id = stack.registry.register(
            name=body.name,
            meta_simple=body.meta_simple,
            meta_abstract=body.meta_abstract,
            category_label=body.category_label,
            adapter_id=body.adapter_id,
            adapter_size_bytes=body.adapter_size_bytes,
            endpoint=body.endpoint,
        )
        stack.manager.register_adapter(expert_id, body.adapter_size_bytes)
        return _envelope({"expert_id": expert_id})

    @app.get("/experts")
    def list_experts():
        return _envelope({"experts": [p.to_json() for p in stack.registry.profiles()]})

    @app.post("/route")
    def route(body: RouteRequest):
        decision = stack.executor.route(
            body.text,
            body.strategy or config.strategy,
            body.style or config.style,
        )
        return _envelope(decision.to_json())

    @app.post("/execute")
    def execute(body: ExecuteRequest):
        result = stack.executor.execute(
            TaskInstruction(task_id=body.task_id, text=body.text),
            body.strategy or config.strategy,
            body.style or config.style,
        )
        return _envelope(result.to_json())

    @app.post("/execute_batch")
    def execute_batch(body: ExecuteBatchRequest):
        tasks = [TaskInstruction(task_id=t.task_id, text=t.text) for t in body.tasks]
        results: list[ExecutionResult] = stack.executor.execute_batch(
            tasks,
            body.strategy or config.strategy,
            body.style or config.style,
            batching=body.batching,
        )
        return _envelope({"results": [r.to_json() for r in results]})

    @app.get("/state")
    def state():
        return _envelope(stack.manager.state_snapshot())

    return app
