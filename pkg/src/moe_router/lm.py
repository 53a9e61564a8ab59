"""Prompt-driven routing: build a structured prompt over the expert catalog,
query a language model client, and parse the returned expert index.

The prompt template is configuration, not code. A template is plain text
with the placeholders {{experts}}, {{examples}}, and {{task}}; the optional
{{output_choices}} placeholder expands to the list of valid ids ("0, 1, or
2") so the instruction text can name them.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .errors import (
    RoutingFailedError,
    RoutingTransportError,
    TransportError,
    UnparsableResponseError,
    ValidationError,
)
from .registry import DescriptionStyle, Registry
from .routing import RoutingDecision, RoutingStrategy


@dataclass(frozen=True)
class FewShotExample:
    """A solved task used to guide the LM's classification."""

    task_text: str
    expert_id: int


@dataclass(frozen=True)
class LmRequest:
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0  # keep 0 for reproducible routing


@dataclass(frozen=True)
class LmResponse:
    text: str


class LmClient(Protocol):
    def complete(self, request: LmRequest) -> LmResponse: ...


_OUTPUT_RE = re.compile(r"Output:\s*([-+]?\d+)")
_BARE_INT_RE = re.compile(r"[-+]?\d+")
_TASK_LINE_RE = re.compile(r"^Task:\s*(.*)$", re.MULTILINE)


def load_template(path: str | Path | None = None) -> str:
    """Read a prompt template from ``path``, or the packaged default."""
    if path is None:
        return resources.files("moe_router").joinpath("templates/default_prompt.txt").read_text("utf-8")
    return Path(path).read_text(encoding="utf-8")


def render_output_choices(k: int) -> str:
    ids = [str(i) for i in range(k)]
    if k == 1:
        return ids[0]
    if k == 2:
        return f"{ids[0]} or {ids[1]}"
    return ", ".join(ids[:-1]) + f", or {ids[-1]}"


def build_prompt(
    task_text: str,
    catalog: Sequence[tuple[int, str]],
    examples: Sequence[FewShotExample] = (),
    template: str | None = None,
) -> str:
    """Render the routing prompt: numbered experts, instructions, few-shot
    examples, then the query task. Deterministic for identical inputs."""
    if not catalog:
        raise ValidationError("cannot build a prompt over an empty catalog")
    ids = {expert_id for expert_id, _ in catalog}
    for example in examples:
        if example.expert_id not in ids:
            raise ValidationError(
                f"few-shot example references unknown expert_id {example.expert_id}"
            )
    if template is None:
        template = load_template()

    expert_lines = "\n".join(f"ID {expert_id}: {desc}" for expert_id, desc in catalog)
    if examples:
        blocks = [f"Task: {ex.task_text}\nOutput: {ex.expert_id}" for ex in examples]
        examples_block = "Examples:\n\n" + "\n\n".join(blocks)
    else:
        examples_block = ""
    rendered = (
        template.replace("{{experts}}", expert_lines)
        .replace("{{output_choices}}", render_output_choices(len(catalog)))
        .replace("{{examples}}", examples_block)
        .replace("{{task}}", task_text)
    )
    return rendered


def parse_expert_index(response_text: str, k: int) -> int:
    """Extract the chosen expert id from an LM reply.

    The integer after the last "Output:" token wins when it lies in [0, k);
    failing that, a reply that is nothing but one integer in range is
    accepted. Anything else raises UnparsableResponseError.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    matches = _OUTPUT_RE.findall(response_text)
    if matches:
        value = int(matches[-1])
        if 0 <= value < k:
            return value
        raise UnparsableResponseError(
            f"LM answered 'Output: {matches[-1]}' but valid ids are 0..{k - 1}"
        )
    stripped = response_text.strip()
    if _BARE_INT_RE.fullmatch(stripped):
        value = int(stripped)
        if 0 <= value < k:
            return value
        raise UnparsableResponseError(f"bare integer {value} is outside 0..{k - 1}")
    raise UnparsableResponseError("no parsable expert index in LM response")


class StaticLmClient:
    """Always answers with the same text. Test double."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.calls = 0

    def complete(self, request: LmRequest) -> LmResponse:
        self.calls += 1
        return LmResponse(text=self.text)


class RuleBasedLmClient:
    """Deterministic keyword -> expert-id mock.

    Extracts the query task from the prompt (the last "Task:" line, which is
    how every bundled template renders the query) and answers with the id of
    the first rule whose keyword occurs in it, wrapped in a short reasoning
    sentence ending in "Output: <id>". With no matching rule it replies with
    ``unmatched_text``, which is deliberately unparsable unless a default id
    is configured.
    """

    def __init__(
        self,
        rules: Sequence[tuple[str, int]],
        default_id: int | None = None,
        unmatched_text: str = "I am not sure",
    ) -> None:
        self.rules = [(keyword.lower(), expert_id) for keyword, expert_id in rules]
        self.default_id = default_id
        self.unmatched_text = unmatched_text
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleBasedLmClient":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [(r["contains"], int(r["expert_id"])) for r in spec.get("rules", [])]
        default = spec.get("default_id")
        return cls(
            rules,
            default_id=None if default is None else int(default),
            unmatched_text=spec.get("unmatched", "I am not sure"),
        )

    @staticmethod
    def extract_task(prompt: str) -> str:
        matches = _TASK_LINE_RE.findall(prompt)
        return matches[-1] if matches else prompt

    def complete(self, request: LmRequest) -> LmResponse:
        self.calls += 1
        task = self.extract_task(request.prompt).lower()
        for keyword, expert_id in self.rules:
            if keyword in task:
                return LmResponse(
                    text=f"The task mentions '{keyword}', which matches expert {expert_id}.\n"
                    f"Output: {expert_id}"
                )
        if self.default_id is not None:
            return LmResponse(text=f"No keyword matched; falling back.\nOutput: {self.default_id}")
        return LmResponse(text=self.unmatched_text)


class RemoteLmClient:
    """Generic chat-completion HTTP client.

    Protocol: POST {"prompt": ..., "max_tokens": N, "temperature": 0}
    -> {"text": "..."}.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def complete(self, request: LmRequest) -> LmResponse:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        try:
            response = self._client.post(self.endpoint, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"LM service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(f"LM service returned HTTP {response.status_code}")
        try:
            return LmResponse(text=str(response.json()["text"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed LM response: {exc}") from exc


class LmRouter:
    """route_by_lm: prompt the client, parse the index, retry once on an
    unparsable reply, and emit a one-hot-scored RoutingDecision."""

    def __init__(
        self,
        registry: Registry,
        client: LmClient,
        template: str | None = None,
        examples: Sequence[FewShotExample] = (),
        max_tokens: int = 256,
    ) -> None:
        self.registry = registry
        self.client = client
        self.template = template if template is not None else load_template()
        self.examples = list(examples)
        self.max_tokens = max_tokens

    def route(self, task_text: str, style: DescriptionStyle | str) -> RoutingDecision:
        started = time.perf_counter()
        style = DescriptionStyle.parse(style)
        if not task_text.strip():
            raise ValidationError("task text is empty")
        catalog = self.registry.catalog(style)  # raises EmptyPoolError when empty
        prompt = build_prompt(task_text, catalog, self.examples, self.template)
        request = LmRequest(prompt=prompt, max_tokens=self.max_tokens, temperature=0.0)

        chosen: int | None = None
        last_error: UnparsableResponseError | None = None
        for _ in range(2):  # one retry with the identical prompt
            try:
                response = self.client.complete(request)
            except TransportError as exc:
                raise RoutingTransportError(str(exc)) from exc
            try:
                chosen = parse_expert_index(response.text, len(catalog))
                break
            except UnparsableResponseError as exc:
                last_error = exc
        if chosen is None:
            raise RoutingFailedError(f"LM routing failed after retry: {last_error}")

        scores = tuple(
            (expert_id, 1.0 if expert_id == chosen else 0.0) for expert_id, _ in catalog
        )
        elapsed_ms = max(0, int(round((time.perf_counter() - started) * 1000)))
        return RoutingDecision(
            expert_id=chosen,
            scores=scores,
            strategy=RoutingStrategy.PROMPT_LM,
            style=style,
            elapsed_ms=elapsed_ms,
            abstained=False,
        )


def route_by_lm(
    task_text: str,
    style: DescriptionStyle | str,
    examples: Sequence[FewShotExample],
    lm_client: LmClient,
    registry: Registry,
    template: str | None = None,
) -> RoutingDecision:
    """Functional form of LmRouter.route."""
    return LmRouter(registry, lm_client, template=template, examples=examples).route(task_text, style)
