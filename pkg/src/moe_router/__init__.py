"""Text-routed mixture-of-experts orchestration.

A registry of text-described experts, two zero-shot routers (embedding
similarity and prompt-driven LM), an adapter lifecycle manager with two
serving modes, a wire-protocol executor, ingestion for task files, and a
routing-quality evaluation harness.
"""

__version__ = "0.1.0"

from .embedding import Embedding, EmbeddingCache, HashingEmbedder, RemoteEmbedder, build_cache, cosine
from .errors import RouterError
from .executor import ExecutionResult, Executor, Outcome
from .ingest import PerturbationPair, load_perturbation_pairs, parse_bddl, parse_tasks_jsonl
from .lm import FewShotExample, LmRouter, RuleBasedLmClient, build_prompt, parse_expert_index
from .registry import DescriptionStyle, ExpertProfile, Registry
from .routing import RoutingDecision, RoutingStrategy, SimilarityRouter
from .serving import AdapterManager, ServingMode, SimulatedClock, SwapEvent, plan_batches
from .tasks import TaskInstruction

__all__ = [
    "__version__",
    "AdapterManager",
    "DescriptionStyle",
    "Embedding",
    "EmbeddingCache",
    "ExecutionResult",
    "Executor",
    "ExpertProfile",
    "FewShotExample",
    "HashingEmbedder",
    "LmRouter",
    "Outcome",
    "PerturbationPair",
    "Registry",
    "RemoteEmbedder",
    "RouterError",
    "RoutingDecision",
    "RoutingStrategy",
    "RuleBasedLmClient",
    "ServingMode",
    "SimilarityRouter",
    "SimulatedClock",
    "SwapEvent",
    "TaskInstruction",
    "build_cache",
    "build_prompt",
    "cosine",
    "load_perturbation_pairs",
    "parse_bddl",
    "parse_expert_index",
    "parse_tasks_jsonl",
    "plan_batches",
]
