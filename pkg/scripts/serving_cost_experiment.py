#!/usr/bin/env python3
"""Serving-cost experiment: memory and swap latency across the two serving
modes, with and without batching, on a simulated clock.

Sweeps the pool size for the resident mode (memory grows linearly) and runs
an alternating-expert workload through the dynamic mode to show swap
amortization via batching.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

import httpx  # noqa: E402

from moe_router import Registry, ServingMode, SimulatedClock, TaskInstruction  # noqa: E402
from moe_router.embedding import HashingEmbedder  # noqa: E402
from moe_router.evaluation import serving_report  # noqa: E402
from moe_router.executor import Dispatcher, Executor  # noqa: E402
from moe_router.routing import SimilarityRouter  # noqa: E402
from moe_router.serving import AdapterManager  # noqa: E402

GB = 1_000_000_000
MB = 1_000_000


def mock_expert_transport():
    def handler(request):
        return httpx.Response(
            200, json={"status": "success", "metric_name": "sr", "metric_value": 1.0}
        )

    return httpx.MockTransport(handler)


def make_executor(registry, mode):
    manager = AdapterManager(
        mode=mode,
        backbone_bytes=4 * GB,
        adapter_sizes=registry.adapter_sizes(),
        memory_budget_bytes=16 * GB,
        clock=SimulatedClock(),
    )
    return Executor(
        registry=registry,
        manager=manager,
        similarity_router=SimilarityRouter(registry, HashingEmbedder()),
        dispatcher=Dispatcher(transport=mock_expert_transport()),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tasks", type=int, default=10, help="alternating workload size")
    parser.add_argument("--fixtures", default=str(REPO / "fixtures"))
    args = parser.parse_args()

    registry = Registry.load(Path(args.fixtures) / "registry.json")

    print("resident-memory scaling (backbone 4 GB, 100 MB adapters):")
    for pool_size in (1, 2, 3, 8, 16):
        sizes = {i: 100 * MB for i in range(pool_size)}
        manager = AdapterManager(ServingMode.ALL_IN_MEMORY, 4 * GB, sizes, 16 * GB)
        print(f"  {pool_size:>2} experts -> {manager.memory_used() / GB:.2f} GB resident")

    texts = {0: "pick up the black bowl", 1: "pour the liquid into the cup"}
    tasks = [TaskInstruction(f"t{i}", texts[i % 2]) for i in range(args.tasks)]

    print(f"\nalternating workload, {len(tasks)} tasks, two experts:")
    rows = {}
    for label, mode, batching in (
        ("all_in_memory", ServingMode.ALL_IN_MEMORY, False),
        ("dynamic_unbatched", ServingMode.DYNAMIC_LOAD, False),
        ("dynamic_batched", ServingMode.DYNAMIC_LOAD, True),
    ):
        executor = make_executor(registry, mode)
        results = executor.execute_batch(tasks, "embedding", "simple", batching=batching)
        summary = serving_report(results, executor.manager)
        rows[label] = summary.to_json()
        print(
            f"  {label:<18} swaps={summary.swap_count:>2}  "
            f"total_swap={summary.total_swap_ms / 1000:.1f}s  "
            f"amortized={summary.amortized_swap_ms_per_task:.0f} ms/task  "
            f"peak_mem={summary.peak_memory_bytes / GB:.2f} GB"
        )

    print("\nJSON:")
    print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
