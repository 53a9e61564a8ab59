import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moe_router import Registry, RuleBasedLmClient, build_prompt, parse_expert_index
from moe_router.errors import (
    RoutingFailedError,
    RoutingTransportError,
    UnparsableResponseError,
    ValidationError,
)
from moe_router.lm import (
    FewShotExample,
    LmRequest,
    LmRouter,
    RemoteLmClient,
    StaticLmClient,
    load_template,
)
from moe_router.routing import RoutingStrategy

from .test_registry import profile_kwargs


def make_pool(k=3):
    registry = Registry()
    for i in range(k):
        registry.register(**profile_kwargs(i))
    return registry


def catalog_of(registry):
    return registry.catalog("simple")


def test_prompt_lists_experts_and_output_choices():
    registry = make_pool(3)
    prompt = build_prompt("pour the tea", catalog_of(registry))
    assert "ID 0: does the literal thing 0" in prompt
    assert "ID 1: does the literal thing 1" in prompt
    assert "ID 2: does the literal thing 2" in prompt
    assert "0, 1, or 2" in prompt
    assert prompt.rstrip().endswith("Reasoning:")
    assert "Task: pour the tea" in prompt


def test_prompt_is_deterministic():
    registry = make_pool(2)
    examples = [FewShotExample("stack the cups", 1)]
    a = build_prompt("wipe the table", catalog_of(registry), examples)
    b = build_prompt("wipe the table", catalog_of(registry), examples)
    assert a == b


def test_prompt_renders_examples_in_order():
    registry = make_pool(3)
    examples = [FewShotExample("first task", 0), FewShotExample("second task", 2)]
    prompt = build_prompt("the query", catalog_of(registry), examples)
    first = prompt.index("Task: first task\nOutput: 0")
    second = prompt.index("Task: second task\nOutput: 2")
    query = prompt.index("Task: the query")
    assert first < second < query


def test_prompt_rejects_out_of_range_example():
    registry = make_pool(3)
    with pytest.raises(ValidationError):
        build_prompt("x", catalog_of(registry), [FewShotExample("y", 7)])


def test_prompt_respects_custom_template():
    registry = make_pool(1)
    template = "EXPERTS\n{{experts}}\nDO {{task}} now, answer with {{output_choices}}"
    prompt = build_prompt("spin", catalog_of(registry), template=template)
    assert prompt == "EXPERTS\nID 0: does the literal thing 0\nDO spin now, answer with 0"


@given(
    st.integers(min_value=1, max_value=5),
    st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=20),
    st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=20),
)
def test_prompt_injective_in_task_text(k, task_a, task_b):
    registry = make_pool(k)
    prompt_a = build_prompt(task_a, catalog_of(registry))
    prompt_b = build_prompt(task_b, catalog_of(registry))
    assert (prompt_a == prompt_b) == (task_a == task_b)


def test_prompt_changes_with_catalog_and_examples():
    base = build_prompt("x", catalog_of(make_pool(3)))
    other_catalog = build_prompt("x", catalog_of(make_pool(4)))
    assert base != other_catalog

    registry = make_pool(3)
    changed = Registry()
    for i in range(3):
        changed.register(
            **profile_kwargs(i, meta_simple=f"rewritten description {i}")
        )
    assert build_prompt("x", catalog_of(registry)) != build_prompt("x", catalog_of(changed))

    with_example = build_prompt("x", catalog_of(registry), [FewShotExample("demo", 1)])
    other_example = build_prompt("x", catalog_of(registry), [FewShotExample("demo", 2)])
    assert base != with_example
    assert with_example != other_example


@pytest.mark.parametrize(
    "response, k, expected",
    [
        ("Reasoning about bowls.\nOutput: 1", 3, 1),
        ("Output: 0", 1, 0),
        ("2", 3, 2),
        ("Output: 2\nwait, no.\nOutput: 0", 3, 0),  # last Output: wins
        ("   7  ", 10, 7),
        ("Output:1", 3, 1),
    ],
)
def test_parse_expert_index_accepts(response, k, expected):
    assert parse_expert_index(response, k) == expected


@pytest.mark.parametrize(
    "response, k",
    [
        ("Output: 9", 3),
        ("Output: -1", 3),
        ("Output: 1", 1),
        ("I am not sure", 3),
        ("the answer is three", 3),
        ("3.5", 10),
        ("", 3),
        ("Output: 1 then Output: 99", 3),  # last occurrence is authoritative
    ],
)
def test_parse_expert_index_rejects(response, k):
    with pytest.raises(UnparsableResponseError):
        parse_expert_index(response, k)


def test_route_by_lm_with_static_client():
    registry = make_pool(3)
    router = LmRouter(registry, StaticLmClient("Output: 0"))
    decision = router.route("anything at all", "simple")
    assert decision.expert_id == 0
    assert decision.strategy is RoutingStrategy.PROMPT_LM
    assert decision.scores == ((0, 1.0), (1, 0.0), (2, 0.0))


def test_rule_based_client_matches_spec_example():
    registry = Registry()
    registry.register(**profile_kwargs(0, meta_simple="pours the liquid"))
    registry.register(**profile_kwargs(1, meta_simple="handles the black bowl"))
    client = RuleBasedLmClient([("bowl", 1), ("pour", 0)])
    router = LmRouter(registry, client)
    decision = router.route("pick up the black bowl", "simple")
    assert decision.expert_id == 1


def test_rule_client_reads_query_not_descriptions():
    # every description mentions "bowl"; only the task line should count
    registry = Registry()
    registry.register(**profile_kwargs(0, meta_simple="bowl expert zero"))
    registry.register(**profile_kwargs(1, meta_simple="bowl expert one"))
    client = RuleBasedLmClient([("bowl", 0), ("cup", 1)])
    decision = LmRouter(registry, client).route("fill the cup", "simple")
    assert decision.expert_id == 1


def test_unparsable_twice_fails_after_one_retry():
    registry = make_pool(3)
    client = StaticLmClient("I am not sure")
    router = LmRouter(registry, client)
    with pytest.raises(RoutingFailedError):
        router.route("pick up the bowl", "simple")
    assert client.calls == 2


class FlakyClient:
    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = 0

    def complete(self, request: LmRequest):
        from moe_router.lm import LmResponse

        self.calls += 1
        return LmResponse(text=self.answers.pop(0))


def test_retry_recovers_from_one_bad_response():
    registry = make_pool(3)
    client = FlakyClient(["garbage", "Output: 2"])
    decision = LmRouter(registry, client).route("sort the cans", "simple")
    assert decision.expert_id == 2
    assert client.calls == 2


def test_remote_client_transport_error_becomes_routing_transport():
    def responder(request):
        raise httpx.ConnectError("no route to host", request=request)

    registry = make_pool(2)
    client = RemoteLmClient("http://lm.local/complete", transport=httpx.MockTransport(responder))
    with pytest.raises(RoutingTransportError):
        LmRouter(registry, client).route("pick up the bowl", "simple")


def test_remote_client_round_trip():
    def responder(request):
        import json

        payload = json.loads(request.content)
        assert payload["temperature"] == 0
        assert "Task: sort the cans" in payload["prompt"]
        return httpx.Response(200, json={"text": "Output: 1"})

    registry = make_pool(3)
    client = RemoteLmClient("http://lm.local/complete", transport=httpx.MockTransport(responder))
    assert LmRouter(registry, client).route("sort the cans", "simple").expert_id == 1


def test_default_template_has_required_placeholders():
    template = load_template()
    for placeholder in ("{{experts}}", "{{examples}}", "{{task}}"):
        assert placeholder in template
