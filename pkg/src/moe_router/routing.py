"""Embedding-similarity routing: pick the expert whose meta-description
embedding has maximal cosine similarity with the task embedding.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .embedding import Embedder, EmbeddingCache, build_cache, catalog_fingerprint, tokenize
from .errors import CacheInvalidError, ValidationError
from .registry import DescriptionStyle, Registry


class RoutingStrategy(enum.Enum):
    EMBEDDING_SIM = "embedding"
    PROMPT_LM = "lm"

    @classmethod
    def parse(cls, value: "RoutingStrategy | str") -> "RoutingStrategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown routing strategy: {value!r}") from None


@dataclass(frozen=True)
class RoutingDecision:
    """Outcome of one routing call.

    ``scores`` covers every registered expert exactly once, in id order.
    ``expert_id`` carries the maximal score (ties broken toward the smallest
    id); when ``abstained`` is set the caller must not dispatch.
    """

    expert_id: int
    scores: tuple[tuple[int, float], ...]
    strategy: RoutingStrategy
    style: DescriptionStyle
    elapsed_ms: int = 0
    abstained: bool = False

    def to_json(self) -> dict:
        return {
            "expert_id": self.expert_id,
            "scores": [[i, s] for i, s in self.scores],
            "strategy": self.strategy.value,
            "style": self.style.value,
            "elapsed_ms": self.elapsed_ms,
            "abstained": self.abstained,
        }


# Scores within this distance of the maximum are treated as tied, so that
# mathematically equal cosines still break to the lowest id even when two
# float paths round them an ulp apart.
TIE_EPSILON = 1e-12


def argmax_lowest_id(scores: list[tuple[int, float]]) -> int:
    """Lowest expert_id among the (near-)maximal scores wins."""
    best = max(score for _, score in scores)
    for expert_id, score in scores:
        if score >= best - TIE_EPSILON:
            return expert_id
    raise AssertionError("unreachable: max not found")


class SimilarityRouter:
    """Routes by argmax cosine between the task and cached meta embeddings.

    ``abstain_margin`` defaults to 0 (disabled). When positive, a decision
    whose top-two score gap falls below the margin is marked abstained and
    the executor refuses to dispatch it.
    """

    def __init__(
        self,
        registry: Registry,
        embedder: Embedder,
        abstain_margin: float = 0.0,
    ) -> None:
        if abstain_margin < 0:
            raise ValidationError("abstain_margin must be >= 0")
        self.registry = registry
        self.embedder = embedder
        self.abstain_margin = abstain_margin
        self._caches: dict[DescriptionStyle, EmbeddingCache] = {}

    def cache_for(self, style: DescriptionStyle | str) -> EmbeddingCache:
        """Return a cache valid for the current catalog, rebuilding if stale."""
        style = DescriptionStyle.parse(style)
        catalog = self.registry.catalog(style)
        expected = catalog_fingerprint(catalog, style, self.embedder.fingerprint_params())
        cached = self._caches.get(style)
        if cached is None or cached.catalog_fingerprint != expected:
            cached = build_cache(catalog, style, self.embedder)
            self._caches[style] = cached
        return cached

    def route(
        self,
        task_text: str,
        style: DescriptionStyle | str,
        cache: EmbeddingCache | None = None,
    ) -> RoutingDecision:
        """route_by_similarity: r = argmax_i cos(E(task), E(description_i)).

        An explicitly passed ``cache`` is checked against the live catalog
        and rejected with CacheInvalidError on fingerprint mismatch.
        """
        started = time.perf_counter()
        style = DescriptionStyle.parse(style)
        if not tokenize(task_text):
            raise ValidationError("task text is empty after normalization")
        catalog = self.registry.catalog(style)  # raises EmptyPoolError when empty
        if cache is not None:
            expected = catalog_fingerprint(catalog, style, self.embedder.fingerprint_params())
            if cache.catalog_fingerprint != expected:
                raise CacheInvalidError("embedding cache is stale for the current registry")
        else:
            cache = self.cache_for(style)

        task_embedding = self.embedder.embed(task_text)
        ids = [expert_id for expert_id, _ in catalog]
        matrix = np.stack([cache.entries[i].values for i in ids])
        task_vec = task_embedding.values
        dots = matrix @ task_vec
        row_norms = np.linalg.norm(matrix, axis=1)
        task_norm = np.linalg.norm(task_vec)
        denom = row_norms * task_norm
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(denom > 0, dots / denom, 0.0)
        sims = np.clip(sims, -1.0, 1.0)

        scores = [(expert_id, float(sims[i])) for i, expert_id in enumerate(ids)]
        chosen = argmax_lowest_id(scores)

        abstained = False
        if self.abstain_margin > 0 and len(scores) >= 2:
            ordered = sorted((s for _, s in scores), reverse=True)
            if ordered[0] - ordered[1] < self.abstain_margin:
                abstained = True

        elapsed_ms = max(0, int(round((time.perf_counter() - started) * 1000)))
        return RoutingDecision(
            expert_id=chosen,
            scores=tuple(scores),
            strategy=RoutingStrategy.EMBEDDING_SIM,
            style=style,
            elapsed_ms=elapsed_ms,
            abstained=abstained,
        )


def route_by_similarity(
    task_text: str,
    style: DescriptionStyle | str,
    cache: EmbeddingCache,
    registry: Registry,
    embedder: Embedder,
    abstain_margin: float = 0.0,
) -> RoutingDecision:
    """Functional form of SimilarityRouter.route with an explicit cache."""
    return SimilarityRouter(registry, embedder, abstain_margin).route(task_text, style, cache)
