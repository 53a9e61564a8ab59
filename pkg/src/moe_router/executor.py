"""End-to-end task execution: route the instruction, make the chosen
expert's adapter resident, then dispatch over the wire protocol.

Routing is episodic (once per instruction) and a failed task is never
re-routed to another expert. Batching groups already-routed tasks by expert
before execution so adapter swaps amortize; the per-task outcomes are
identical with batching on or off, only swap events and timings move.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass
from typing import Sequence

import httpx

from .errors import (
    DispatchTransportError,
    NoExpertSelectedError,
    ProtocolError,
    RouterError,
    RoutingFailedError,
    ValidationError,
)
from .lm import LmRouter
from .registry import DescriptionStyle, ExpertProfile, Registry
from .routing import RoutingDecision, RoutingStrategy, SimilarityRouter
from .serving import AdapterManager, SwapEvent, plan_batches
from .tasks import TaskInstruction


@dataclass(frozen=True)
class Outcome:
    """What the expert reported: it alone decides success or failure."""

    status: str  # "success" | "failure"
    metric_name: str
    metric_value: float

    def to_json(self) -> dict:
        return {"status": self.status, "metric_name": self.metric_name, "metric_value": self.metric_value}


@dataclass(frozen=True)
class ExecutionResult:
    task_id: str
    expert_id: int | None
    trajectory: bytes
    outcome: Outcome | None
    routing: RoutingDecision | None
    swap: SwapEvent | None
    total_ms: int
    error_code: str | None = None
    error_message: str | None = None

    @property
    def failed(self) -> bool:
        return self.error_code is not None

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "expert_id": self.expert_id,
            "trajectory_b64": base64.b64encode(self.trajectory).decode("ascii") if self.trajectory else None,
            "outcome": self.outcome.to_json() if self.outcome else None,
            "routing": self.routing.to_json() if self.routing else None,
            "swap": self.swap.to_json() if self.swap else None,
            "total_ms": self.total_ms,
            "error": None
            if self.error_code is None
            else {"code": self.error_code, "message": self.error_message},
        }


_VALID_STATUSES = ("success", "failure")


class Dispatcher:
    """Speaks the expert wire protocol.

    POST {"task_id", "text", "adapter_id"} to the expert endpoint and expect
    {"status": "success"|"failure", "metric_name": str, "metric_value": real,
    "trajectory_b64": optional str}.
    """

    def __init__(self, timeout_s: float = 60.0, transport: httpx.BaseTransport | None = None) -> None:
        self.timeout_s = timeout_s
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def dispatch(self, expert: ExpertProfile, task: TaskInstruction) -> tuple[bytes, Outcome]:
        payload = {"task_id": task.task_id, "text": task.text, "adapter_id": expert.adapter_id}
        try:
            response = self._client.post(expert.endpoint, json=payload)
        except httpx.HTTPError as exc:
            raise DispatchTransportError(f"expert endpoint {expert.endpoint} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"expert returned HTTP {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError(f"expert response is not JSON: {exc}") from exc
        if not isinstance(body, dict) or "status" not in body:
            raise ProtocolError("expert response missing 'status'")
        status = body["status"]
        if status not in _VALID_STATUSES:
            raise ProtocolError(f"expert status must be one of {_VALID_STATUSES}, got {status!r}")
        if "metric_name" not in body or "metric_value" not in body:
            raise ProtocolError("expert response missing metric fields")
        metric_name = body["metric_name"]
        metric_value = body["metric_value"]
        if not isinstance(metric_name, str):
            raise ProtocolError("metric_name must be a string")
        if isinstance(metric_value, bool) or not isinstance(metric_value, (int, float)):
            raise ProtocolError("metric_value must be a number")
        trajectory = b""
        if body.get("trajectory_b64"):
            try:
                trajectory = base64.b64decode(body["trajectory_b64"], validate=True)
            except (ValueError, TypeError) as exc:
                raise ProtocolError(f"trajectory_b64 is not valid base64: {exc}") from exc
        return trajectory, Outcome(status=status, metric_name=metric_name, metric_value=float(metric_value))


class Executor:
    """Binds routers, the adapter manager, and the dispatcher.

    ``trace`` records (phase, task_id) tuples in wire order so tests can
    assert the route -> swap -> dispatch sequencing.
    """

    def __init__(
        self,
        registry: Registry,
        manager: AdapterManager,
        similarity_router: SimilarityRouter | None = None,
        lm_router: LmRouter | None = None,
        dispatcher: Dispatcher | None = None,
    ) -> None:
        self.registry = registry
        self.manager = manager
        self.similarity_router = similarity_router
        self.lm_router = lm_router
        self.dispatcher = dispatcher if dispatcher is not None else Dispatcher()
        self.trace: list[tuple[str, str]] = []

    def route(
        self,
        task_text: str,
        strategy: RoutingStrategy | str,
        style: DescriptionStyle | str,
    ) -> RoutingDecision:
        strategy = RoutingStrategy.parse(strategy)
        if strategy is RoutingStrategy.EMBEDDING_SIM:
            if self.similarity_router is None:
                raise ValidationError("no similarity router configured")
            return self.similarity_router.route(task_text, style)
        if self.lm_router is None:
            raise ValidationError("no LM router configured")
        return self.lm_router.route(task_text, style)

    def execute(
        self,
        task: TaskInstruction,
        strategy: RoutingStrategy | str,
        style: DescriptionStyle | str,
    ) -> ExecutionResult:
        """Algorithm order: route, then ensure_loaded, then dispatch."""
        if not task.text.strip():
            raise ValidationError("task text is empty")
        try:
            decision = self.route(task.text, strategy, style)
        except RoutingFailedError as exc:
            raise NoExpertSelectedError(str(exc)) from exc
        self.trace.append(("route", task.task_id))
        if decision.abstained:
            raise NoExpertSelectedError(
                f"routing abstained on task {task.task_id} (margin not met)"
            )
        swap = self.manager.ensure_loaded(decision.expert_id)
        if swap is not None:
            self.trace.append(("swap", task.task_id))
        return self._dispatch_routed(task, decision, swap)

    def _dispatch_routed(
        self,
        task: TaskInstruction,
        decision: RoutingDecision,
        swap: SwapEvent | None,
    ) -> ExecutionResult:
        profile = self.registry.get(decision.expert_id)
        started = time.perf_counter()
        trajectory, outcome = self.dispatcher.dispatch(profile, task)
        dispatch_ms = max(0, int(round((time.perf_counter() - started) * 1000)))
        self.trace.append(("dispatch", task.task_id))
        swap_ms = swap.duration_ms if swap is not None else 0
        return ExecutionResult(
            task_id=task.task_id,
            expert_id=decision.expert_id,
            trajectory=trajectory,
            outcome=outcome,
            routing=decision,
            swap=swap,
            total_ms=decision.elapsed_ms + swap_ms + dispatch_ms,
        )

    def execute_batch(
        self,
        tasks: Sequence[TaskInstruction],
        strategy: RoutingStrategy | str,
        style: DescriptionStyle | str,
        batching: bool = True,
    ) -> list[ExecutionResult]:
        """Execute a batch; per-task failures are recorded, never raised.

        With batching on, all tasks are routed first, grouped by expert via
        plan_batches, and executed group by group. Results always come back
        in submission order.
        """
        seen: set[str] = set()
        for task in tasks:
            if task.task_id in seen:
                raise ValidationError(f"duplicate task_id in batch: {task.task_id!r}")
            seen.add(task.task_id)

        if not batching:
            return [self._execute_recorded(task, strategy, style) for task in tasks]

        results: dict[str, ExecutionResult] = {}
        decisions: dict[str, RoutingDecision] = {}
        routed: list[tuple[str, int]] = []
        by_id = {task.task_id: task for task in tasks}
        for task in tasks:
            try:
                if not task.text.strip():
                    raise ValidationError("task text is empty")
                try:
                    decision = self.route(task.text, strategy, style)
                except RoutingFailedError as exc:
                    raise NoExpertSelectedError(str(exc)) from exc
                self.trace.append(("route", task.task_id))
                if decision.abstained:
                    raise NoExpertSelectedError(
                        f"routing abstained on task {task.task_id} (margin not met)"
                    )
                decisions[task.task_id] = decision
                routed.append((task.task_id, decision.expert_id))
            except RouterError as exc:
                results[task.task_id] = _error_result(task.task_id, exc)

        for expert_id, task_ids in plan_batches(routed):
            swap = self.manager.ensure_loaded(expert_id)
            if swap is not None:
                self.trace.append(("swap", task_ids[0]))
            for task_id in task_ids:
                task = by_id[task_id]
                try:
                    results[task_id] = self._dispatch_routed(task, decisions[task_id], swap)
                except RouterError as exc:
                    results[task_id] = _error_result(task_id, exc, decisions.get(task_id), swap)
                swap = None  # only the group's first task carries the swap event

        return [results[task.task_id] for task in tasks]

    def _execute_recorded(
        self,
        task: TaskInstruction,
        strategy: RoutingStrategy | str,
        style: DescriptionStyle | str,
    ) -> ExecutionResult:
        try:
            return self.execute(task, strategy, style)
        except RouterError as exc:
            return _error_result(task.task_id, exc)


def _error_result(
    task_id: str,
    exc: RouterError,
    decision: RoutingDecision | None = None,
    swap: SwapEvent | None = None,
) -> ExecutionResult:
    return ExecutionResult(
        task_id=task_id,
        expert_id=decision.expert_id if decision else None,
        trajectory=b"",
        outcome=None,
        routing=decision,
        swap=swap,
        total_ms=(decision.elapsed_ms if decision else 0) + (swap.duration_ms if swap else 0),
        error_code=exc.code,
        error_message=str(exc),
    )
