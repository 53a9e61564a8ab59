"""Assembly of the full routing stack from a ServiceConfig.

Tests and embedders swap individual collaborators by passing them in;
anything not supplied is built from the config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import httpx

from .config import ServiceConfig
from .embedding import Embedder, HashingEmbedder, RemoteEmbedder
from .errors import ConfigError
from .executor import Dispatcher, Executor
from .lm import FewShotExample, LmClient, LmRouter, RemoteLmClient, RuleBasedLmClient, load_template
from .registry import DescriptionStyle, Registry
from .routing import RoutingStrategy, SimilarityRouter
from .serving import AdapterManager


@dataclass
class ServiceStack:
    config: ServiceConfig
    registry: Registry
    embedder: Embedder
    similarity_router: SimilarityRouter
    lm_router: LmRouter | None
    manager: AdapterManager
    executor: Executor


def load_few_shot(path) -> list[FewShotExample]:
    entries = json.loads(path.read_text(encoding="utf-8"))
    return [FewShotExample(task_text=e["task_text"], expert_id=int(e["expert_id"])) for e in entries]


def build_stack(
    config: ServiceConfig,
    registry: Registry | None = None,
    embedder: Embedder | None = None,
    lm_client: LmClient | None = None,
    dispatch_transport: httpx.BaseTransport | None = None,
    clock=None,
) -> ServiceStack:
    if registry is None:
        if config.registry_path is None:
            registry = Registry()
        else:
            registry = Registry.load(config.registry_path)

    if embedder is None:
        if config.embedding_backend == "builtin":
            embedder = HashingEmbedder(dim=config.embedding_dim)
        else:
            embedder = RemoteEmbedder(config.embedding_backend)

    similarity_router = SimilarityRouter(registry, embedder, abstain_margin=config.abstain_margin)

    template = load_template(config.prompt_template_path)
    examples = load_few_shot(config.few_shot_path) if config.few_shot_path else []
    if lm_client is None:
        rules_path = config.lm_rules_path()
        if rules_path is not None:
            lm_client = RuleBasedLmClient.from_file(rules_path)
        elif config.lm_backend is not None:
            lm_client = RemoteLmClient(config.lm_backend)
    lm_router = (
        LmRouter(registry, lm_client, template=template, examples=examples) if lm_client else None
    )

    manager = AdapterManager(
        mode=config.serving_mode,
        backbone_bytes=config.backbone_bytes,
        adapter_sizes=registry.adapter_sizes(),
        memory_budget_bytes=config.memory_budget_bytes,
        swap_latency_ms=config.swap_latency_ms,
        clock=clock,
        event_log_path=config.event_log_path,
    )
    executor = Executor(
        registry=registry,
        manager=manager,
        similarity_router=similarity_router,
        lm_router=lm_router,
        dispatcher=Dispatcher(timeout_s=config.dispatch_timeout_s, transport=dispatch_transport),
    )
    return ServiceStack(
        config=config,
        registry=registry,
        embedder=embedder,
        similarity_router=similarity_router,
        lm_router=lm_router,
        manager=manager,
        executor=executor,
    )


def route_fn_matrix(stack: ServiceStack, strategies=None, styles=None):
    """Build the (strategy, style) -> route function mapping used by the
    robustness evaluation."""
    if strategies is None:
        strategies = [RoutingStrategy.EMBEDDING_SIM]
        if stack.lm_router is not None:
            strategies.append(RoutingStrategy.PROMPT_LM)
    else:
        strategies = [RoutingStrategy.parse(s) for s in strategies]
    if styles is None:
        styles = list(DescriptionStyle)
    else:
        styles = [DescriptionStyle.parse(s) for s in styles]

    fns = {}
    for strategy in strategies:
        if strategy is RoutingStrategy.PROMPT_LM and stack.lm_router is None:
            raise ConfigError("LM strategy requested but no lm_backend configured")
        for style in styles:
            def fn(text, _strategy=strategy, _style=style):
                return stack.executor.route(text, _strategy, _style)

            fns[(strategy.value, style.value)] = fn
    return fns
