"""Shim acceptance: wire-fixture conformance (standalone, no router build
needed) and an end-to-end batch driven by the router's executor over a real
socket."""

import base64
import json
import threading
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from expert_shim import OutcomeRule, ShimConfig, create_app

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def validate_response_schema(body: dict) -> None:
    """Wire-protocol response contract, restated locally so this check does
    not depend on the router package."""
    assert body["status"] in ("success", "failure")
    assert isinstance(body["metric_name"], str)
    assert isinstance(body["metric_value"], (int, float))
    assert not isinstance(body["metric_value"], bool)
    if "trajectory_b64" in body and body["trajectory_b64"] is not None:
        base64.b64decode(body["trajectory_b64"], validate=True)


def test_recorded_wire_fixtures_conform():
    fixtures = json.loads((FIXTURES / "wire_requests.json").read_text())
    assert len(fixtures) >= 10
    config = ShimConfig.from_file(FIXTURES / "rules.json")
    client = TestClient(create_app(config))

    expected_log = []
    for fixture in fixtures:
        response = client.post("/", json=fixture["body"])
        if fixture["valid"]:
            assert response.status_code == 200, fixture["name"]
            validate_response_schema(response.json())
            expected_log.append(fixture["body"]["task_id"])
        else:
            assert response.status_code == 400, fixture["name"]
            assert response.json()["error"]["code"] == "protocol_error"

    entries = client.get("/log").json()["entries"]
    assert [e["task_id"] for e in entries] == expected_log


class RunningShim:
    """Shim on a real ephemeral port, driven by uvicorn in a thread."""

    def __init__(self, config: ShimConfig):
        import uvicorn

        self.app = create_app(config)
        self.server = uvicorn.Server(
            uvicorn.Config(self.app, host="127.0.0.1", port=0, log_level="warning")
        )
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> "RunningShim":
        self.thread.start()
        deadline = time.monotonic() + 15
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("shim server did not start")
            time.sleep(0.01)
        self.port = self.server.servers[0].sockets[0].getsockname()[1]
        return self

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


E2E_RULES = [
    OutcomeRule("bowl", "success", "sr", 1.0),
    OutcomeRule("pour", "success", "sr", 0.9),
    OutcomeRule("pitcher", "success", "sr", 0.9),
    OutcomeRule("sort", "success", "sr", 0.8),
    OutcomeRule("can", "success", "sr", 0.8),
]

# (task text, expert the router should pick, metric the rule table yields)
E2E_TASKS = [
    ("pick up the black bowl", 0, 1.0),
    ("pour the liquid into the cup", 1, 0.9),
    ("sort the cans into the bins", 2, 0.8),
    ("place the bowl on the plate", 0, 1.0),
    ("pour water from the pitcher", 1, 0.9),
    ("sort the red cans into the red bin", 2, 0.8),
    ("carry the black bowl over to the plate", 0, 1.0),
    ("fill the cup from the pitcher", 1, 0.9),
    ("put each can into its matching bin", 2, 0.8),
    ("put the bowl on the white plate", 0, 1.0),
]


def test_end_to_end_batch_against_router_executor():
    moe_router = pytest.importorskip(
        "moe_router", reason="router package not installed; standalone shim build"
    )
    from moe_router import Registry, ServingMode, SimulatedClock, TaskInstruction
    from moe_router.executor import Dispatcher, Executor
    from moe_router.routing import SimilarityRouter
    from moe_router.serving import AdapterManager

    config = ShimConfig(adapter_id="adapter-shared", rules=E2E_RULES)
    with RunningShim(config) as shim:
        endpoint = f"http://127.0.0.1:{shim.port}/execute"
        registry = Registry()
        for name, simple, abstract, category in (
            ("bowl-mover", "picks up the black bowl and places it on the plate",
             "transports items between spatial zones", "pick_place"),
            ("pour-specialist", "pours liquid from the pitcher into the cup",
             "transfers contents between containers by tilting", "pouring"),
            ("can-sorter", "sorts the cans into matching colored bins",
             "groups scattered objects into designated areas by kind", "sorting"),
        ):
            registry.register(
                name=name,
                meta_simple=simple,
                meta_abstract=abstract,
                category_label=category,
                adapter_id=f"adapter-{category}",
                adapter_size_bytes=100_000_000,
                endpoint=endpoint,
            )

        manager = AdapterManager(
            mode=ServingMode.DYNAMIC_LOAD,
            backbone_bytes=4_000_000_000,
            adapter_sizes=registry.adapter_sizes(),
            memory_budget_bytes=8_000_000_000,
            clock=SimulatedClock(),
        )
        executor = Executor(
            registry=registry,
            manager=manager,
            similarity_router=SimilarityRouter(registry, moe_router.HashingEmbedder()),
            dispatcher=Dispatcher(timeout_s=10.0),
        )

        tasks = [TaskInstruction(f"t{i}", text) for i, (text, _, _) in enumerate(E2E_TASKS)]
        results = executor.execute_batch(tasks, "embedding", "simple", batching=True)

        assert len(results) == 10
        for result, (_, expert_id, metric_value) in zip(results, E2E_TASKS):
            assert result.error_code is None, result.error_message
            assert result.expert_id == expert_id
            assert result.outcome.status == "success"
            assert result.outcome.metric_value == metric_value
            assert result.trajectory == result.task_id.encode()

        # grouped dispatch: the shim saw expert-0 tasks, then 1, then 2
        entries = shim.app.state.log
        assert [e["task_id"] for e in entries] == [
            "t0", "t3", "t6", "t9", "t1", "t4", "t7", "t2", "t5", "t8",
        ]
        assert {e["adapter_id"] for e in entries[:4]} == {"adapter-pick_place"}
        assert manager.swap_count == 2  # three groups, first load free
