import base64
import json
from pathlib import Path

import httpx
import pytest

from moe_router import HashingEmbedder, Registry, SimilarityRouter
from moe_router.executor import Dispatcher, Executor
from moe_router.lm import LmRouter, RuleBasedLmClient
from moe_router.serving import AdapterManager, ServingMode, SimulatedClock

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def registry() -> Registry:
    return Registry.load(FIXTURES / "registry.json")


@pytest.fixture
def embedder() -> HashingEmbedder:
    return HashingEmbedder()


@pytest.fixture
def lm_rules_client() -> RuleBasedLmClient:
    return RuleBasedLmClient.from_file(FIXTURES / "lm_rules.json")


def echo_success_transport(metric_name="sr", metric_value=1.0):
    """Mock expert reachable at any endpoint; echoes the task_id back as the
    trajectory payload."""

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        return httpx.Response(
            200,
            json={
                "status": "success",
                "metric_name": metric_name,
                "metric_value": metric_value,
                "trajectory_b64": base64.b64encode(body["task_id"].encode()).decode(),
            },
        )

    return httpx.MockTransport(handler)


def make_executor(
    registry: Registry,
    mode=ServingMode.DYNAMIC_LOAD,
    transport: httpx.BaseTransport | None = None,
    clock: SimulatedClock | None = None,
    abstain_margin: float = 0.0,
    lm_client=None,
    backbone_bytes: int = 4_000_000_000,
    memory_budget_bytes: int = 8_000_000_000,
    swap_latency_ms: int = 9400,
) -> Executor:
    manager = AdapterManager(
        mode=mode,
        backbone_bytes=backbone_bytes,
        adapter_sizes=registry.adapter_sizes(),
        memory_budget_bytes=memory_budget_bytes,
        swap_latency_ms=swap_latency_ms,
        clock=clock if clock is not None else SimulatedClock(),
    )
    similarity = SimilarityRouter(registry, HashingEmbedder(), abstain_margin=abstain_margin)
    lm_router = LmRouter(registry, lm_client) if lm_client is not None else None
    return Executor(
        registry=registry,
        manager=manager,
        similarity_router=similarity,
        lm_router=lm_router,
        dispatcher=Dispatcher(transport=transport or echo_success_transport()),
    )
