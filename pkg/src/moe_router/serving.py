"""Adapter serving modes, memory ledger, and swap-latency model.

Two configurations:

  * ALL_IN_MEMORY: every adapter stays resident next to the backbone, so
    switching experts is free but memory grows linearly with the pool.
  * DYNAMIC_LOAD: a single adapter slot; switching to a different expert
    replaces the resident adapter and costs ``swap_latency_ms`` (default
    9400 ms) on the injected clock.

The first load into an empty slot is deployment, not a swap: it emits no
SwapEvent and costs nothing. Only cross-expert replacements count, which is
what makes grouping same-expert tasks (plan_batches) amortize the latency.
"""

from __future__ import annotations

import enum
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Protocol, Sequence

from .errors import BudgetExceededError, ExpertNotFoundError, ValidationError

DEFAULT_SWAP_LATENCY_MS = 9400


class ServingMode(enum.Enum):
    ALL_IN_MEMORY = "all_in_memory"
    DYNAMIC_LOAD = "dynamic_load"

    @classmethod
    def parse(cls, value: "ServingMode | str") -> "ServingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown serving mode: {value!r}") from None


class Clock(Protocol):
    def now_ms(self) -> int: ...

    def advance(self, ms: int) -> None: ...


class SimulatedClock:
    """Monotonic virtual clock; tests assert exact swap timings against it."""

    def __init__(self, start_ms: int = 0) -> None:
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValidationError("clock cannot move backwards")
        self._now += ms


class WallClock:
    """Real time. advance() is a no-op: wall time passes on its own, and the
    manager never sleeps to emulate a swap."""

    def __init__(self) -> None:
        self._origin = time.monotonic()

    def now_ms(self) -> int:
        return int((time.monotonic() - self._origin) * 1000)

    def advance(self, ms: int) -> None:
        pass


@dataclass(frozen=True)
class SwapEvent:
    """One adapter replacement. Emitted only when a resident adapter is
    evicted for a different one."""

    from_expert: int | None
    to_expert: int
    started_at_ms: int
    duration_ms: int

    def to_json(self) -> dict:
        return {
            "from": self.from_expert,
            "to": self.to_expert,
            "started_at_ms": self.started_at_ms,
            "duration_ms": self.duration_ms,
        }


class AdapterManager:
    """Owns the serving state: mode, loaded adapter set, memory ledger, and
    the swap event log. ensure_loaded() calls are serialized; at most one
    swap is in flight at a time.
    """

    def __init__(
        self,
        mode: ServingMode | str,
        backbone_bytes: int,
        adapter_sizes: Mapping[int, int],
        memory_budget_bytes: int,
        swap_latency_ms: int = DEFAULT_SWAP_LATENCY_MS,
        clock: Clock | None = None,
        event_log_path: str | Path | None = None,
    ) -> None:
        mode = ServingMode.parse(mode)
        if backbone_bytes <= 0:
            raise ValidationError("backbone_bytes must be positive")
        if memory_budget_bytes <= 0:
            raise ValidationError("memory_budget_bytes must be positive")
        if swap_latency_ms < 0:
            raise ValidationError("swap_latency_ms must be >= 0")
        for expert_id, size in adapter_sizes.items():
            if size <= 0:
                raise ValidationError(f"adapter size for expert {expert_id} must be positive")

        self.mode = mode
        self.backbone_bytes = backbone_bytes
        self.memory_budget_bytes = memory_budget_bytes
        self.swap_latency_ms = swap_latency_ms
        self.clock: Clock = clock if clock is not None else WallClock()
        self._adapter_sizes = dict(adapter_sizes)
        self._lock = threading.Lock()
        self._events: list[SwapEvent] = []
        self._event_log: IO[str] | None = None
        if event_log_path is not None:
            self._event_log = Path(event_log_path).open("a", encoding="utf-8")

        required = self._required_bytes()
        if required > memory_budget_bytes:
            raise BudgetExceededError(
                f"{mode.value} needs {required} bytes but the budget is "
                f"{memory_budget_bytes} (short {required - memory_budget_bytes})"
            )

        if mode is ServingMode.ALL_IN_MEMORY:
            self.loaded: set[int] = set(self._adapter_sizes)
        else:
            self.loaded = set()
        self.active: int | None = None
        self.peak_memory_bytes = self.memory_used()

    def _required_bytes(self) -> int:
        sizes = self._adapter_sizes.values()
        if self.mode is ServingMode.ALL_IN_MEMORY:
            return self.backbone_bytes + sum(sizes)
        return self.backbone_bytes + (max(sizes) if sizes else 0)

    def _admission_shortfall(self, size_bytes: int) -> int:
        sizes = list(self._adapter_sizes.values()) + [size_bytes]
        if self.mode is ServingMode.ALL_IN_MEMORY:
            required = self.backbone_bytes + sum(sizes)
        else:
            required = self.backbone_bytes + max(sizes)
        return required - self.memory_budget_bytes

    def check_admissible(self, size_bytes: int) -> None:
        """Raise if an adapter of this size would not fit the budget.
        Non-mutating, for callers that must validate before committing."""
        if size_bytes <= 0:
            raise ValidationError("adapter size must be positive")
        shortfall = self._admission_shortfall(size_bytes)
        if shortfall > 0:
            raise BudgetExceededError(
                f"adapter of {size_bytes} bytes does not fit the "
                f"{self.memory_budget_bytes}-byte budget (short {shortfall})"
            )

    def register_adapter(self, expert_id: int, size_bytes: int) -> None:
        """Admit a newly registered expert's adapter, enforcing the budget."""
        with self._lock:
            self.check_admissible(size_bytes)
            self._adapter_sizes[expert_id] = size_bytes
            if self.mode is ServingMode.ALL_IN_MEMORY:
                self.loaded.add(expert_id)
            self.peak_memory_bytes = max(self.peak_memory_bytes, self.memory_used())

    def memory_used(self) -> int:
        if self.mode is ServingMode.ALL_IN_MEMORY:
            return self.backbone_bytes + sum(self._adapter_sizes.values())
        if self.active is None:
            return self.backbone_bytes
        return self.backbone_bytes + self._adapter_sizes[self.active]

    def ensure_loaded(self, expert_id: int) -> SwapEvent | None:
        """Make the expert's adapter resident.

        ALL_IN_MEMORY and already-active targets are free. Replacing a
        different resident adapter advances the clock by swap_latency_ms and
        emits a SwapEvent.
        """
        if expert_id not in self._adapter_sizes:
            raise ExpertNotFoundError(f"no adapter registered for expert {expert_id}")
        with self._lock:
            if self.mode is ServingMode.ALL_IN_MEMORY:
                if self.active != expert_id:
                    self.active = expert_id
                return None
            if self.active == expert_id:
                return None
            previous = self.active
            if previous is None:
                # deployment, not a swap: free initial load
                self.loaded = {expert_id}
                self.active = expert_id
                self.peak_memory_bytes = max(self.peak_memory_bytes, self.memory_used())
                return None
            event = SwapEvent(
                from_expert=previous,
                to_expert=expert_id,
                started_at_ms=self.clock.now_ms(),
                duration_ms=self.swap_latency_ms,
            )
            self.clock.advance(self.swap_latency_ms)
            self.loaded = {expert_id}
            self.active = expert_id
            self._events.append(event)
            if self._event_log is not None:
                self._event_log.write(json.dumps(event.to_json()) + "\n")
                self._event_log.flush()
            self.peak_memory_bytes = max(self.peak_memory_bytes, self.memory_used())
            return event

    @property
    def events(self) -> tuple[SwapEvent, ...]:
        return tuple(self._events)

    @property
    def swap_count(self) -> int:
        return len(self._events)

    @property
    def total_swap_ms(self) -> int:
        return sum(e.duration_ms for e in self._events)

    def state_snapshot(self) -> dict:
        return {
            "mode": self.mode.value,
            "backbone_bytes": self.backbone_bytes,
            "memory_budget_bytes": self.memory_budget_bytes,
            "swap_latency_ms": self.swap_latency_ms,
            "loaded": sorted(self.loaded),
            "active": self.active,
            "memory_used_bytes": self.memory_used(),
            "peak_memory_bytes": self.peak_memory_bytes,
            "swap_count": self.swap_count,
            "total_swap_ms": self.total_swap_ms,
            "clock_ms": self.clock.now_ms(),
        }


def configure(
    mode: ServingMode | str,
    backbone_bytes: int,
    adapter_sizes: Mapping[int, int],
    memory_budget_bytes: int,
    swap_latency_ms: int = DEFAULT_SWAP_LATENCY_MS,
    **kwargs,
) -> AdapterManager:
    """Build a serving state; raises BudgetExceededError when infeasible."""
    return AdapterManager(
        mode, backbone_bytes, adapter_sizes, memory_budget_bytes, swap_latency_ms, **kwargs
    )


def plan_batches(
    assignments: Sequence[tuple[str, int]],
) -> list[tuple[int, list[str]]]:
    """Group routed tasks by expert to amortize swaps.

    Stable: experts appear in first-appearance order and tasks keep their
    submission order within each group. Executing the schedule incurs one
    swap per expert transition instead of one per interleaved task.
    """
    groups: dict[int, list[str]] = {}
    for task_id, expert_id in assignments:
        groups.setdefault(expert_id, []).append(task_id)
    return [(expert_id, task_ids) for expert_id, task_ids in groups.items()]


def schedule_swap_count(
    schedule: Sequence[tuple[int, Sequence[str]]],
    active: int | None,
    mode: ServingMode = ServingMode.DYNAMIC_LOAD,
) -> int:
    """Swaps incurred by running ``schedule`` from the given active expert."""
    if mode is ServingMode.ALL_IN_MEMORY:
        return 0
    swaps = 0
    current = active
    for expert_id, _ in schedule:
        if current is not None and current != expert_id:
            swaps += 1
        current = expert_id
    return swaps


def amortized_swap_cost(
    schedule: Sequence[tuple[int, Sequence[str]]],
    manager: AdapterManager,
) -> float:
    """Swap milliseconds per task for executing ``schedule`` from the
    manager's current state. Does not mutate the manager."""
    total_tasks = sum(len(task_ids) for _, task_ids in schedule)
    if total_tasks == 0:
        raise ValidationError("amortized cost is undefined for an empty schedule")
    swaps = schedule_swap_count(schedule, manager.active, manager.mode)
    return swaps * manager.swap_latency_ms / total_tasks
