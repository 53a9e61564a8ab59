import math
import random

import pytest

from moe_router import DescriptionStyle, HashingEmbedder, Registry, SimilarityRouter
from moe_router.embedding import Embedding, build_cache
from moe_router.errors import CacheInvalidError, EmptyPoolError, ValidationError
from moe_router.routing import RoutingStrategy

from .test_registry import profile_kwargs


class FixedEmbedder:
    """Deterministic stub mapping known texts to hand-built vectors."""

    def __init__(self, mapping, dim):
        self.mapping = {k: list(v) for k, v in mapping.items()}
        self.dim = dim

    def embed(self, text):
        return Embedding.from_values(self.mapping[text])

    def embed_batch(self, texts):
        return [self.embed(t) for t in texts]

    def fingerprint_params(self):
        return {"backend": "fixed", "dim": self.dim}


def make_pool(descriptions):
    registry = Registry()
    for i, desc in enumerate(descriptions):
        registry.register(**profile_kwargs(i, meta_simple=desc, meta_abstract=f"abstract {i}"))
    return registry


def brute_force_argmax(task_vec, expert_vecs, tie_eps=1e-12):
    """Independent oracle: plain-python cosines; the first expert within
    tie_eps of the maximum wins (same tie semantics as the router)."""

    def cos(a, b):
        num = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(x * x for x in b))
        if na == 0 or nb == 0:
            return 0.0
        return num / (na * nb)

    scored = [(expert_id, cos(task_vec, vec)) for expert_id, vec in expert_vecs]
    best = max(score for _, score in scored)
    for expert_id, score in scored:
        if score >= best - tie_eps:
            return expert_id
    raise AssertionError("unreachable")


def test_self_match_scores_one(registry):
    router = SimilarityRouter(registry, HashingEmbedder())
    description = registry.get(1).meta_simple
    decision = router.route(description, "simple")
    assert decision.expert_id == 1
    assert dict(decision.scores)[1] == pytest.approx(1.0, abs=1e-9)
    assert decision.strategy is RoutingStrategy.EMBEDDING_SIM
    assert not decision.abstained


def test_hand_built_three_expert_case():
    registry = make_pool(["d0", "d1", "d2"])
    embedder = FixedEmbedder(
        {"d0": [1, 0, 0], "d1": [0, 1, 0], "d2": [0, 0, 1], "t": [0.9, 0.1, 0.0]}, dim=3
    )
    router = SimilarityRouter(registry, embedder)
    decision = router.route("t", "simple")
    assert decision.expert_id == 0
    expected = 0.9 / math.sqrt(0.9**2 + 0.1**2)
    assert dict(decision.scores)[0] == pytest.approx(expected, abs=1e-12)


def test_scores_cover_every_expert_once(registry):
    router = SimilarityRouter(registry, HashingEmbedder())
    decision = router.route("pour the liquid into the cup", "simple")
    assert [expert_id for expert_id, _ in decision.scores] == [0, 1, 2]


def test_tie_breaks_to_smaller_id():
    registry = make_pool(["pours the liquid", "pours the liquid", "sorts the cans"])
    router = SimilarityRouter(registry, HashingEmbedder())
    decision = router.route("pours the liquid", "simple")
    assert decision.expert_id == 0
    assert not decision.abstained


def test_stale_cache_is_rejected(registry):
    router = SimilarityRouter(registry, HashingEmbedder())
    cache = router.cache_for("simple")
    registry.register(**profile_kwargs(9, meta_simple="washes the windows"))
    with pytest.raises(CacheInvalidError):
        router.route("pick up the black bowl", "simple", cache=cache)


def test_fresh_explicit_cache_is_accepted(registry, embedder):
    cache = build_cache(registry.catalog("simple"), "simple", embedder)
    router = SimilarityRouter(registry, embedder)
    decision = router.route("pick up the black bowl", "simple", cache=cache)
    assert decision.expert_id == 0


def test_empty_task_text_is_rejected(registry):
    router = SimilarityRouter(registry, HashingEmbedder())
    with pytest.raises(ValidationError):
        router.route("  ?! ", "simple")


def test_empty_registry_is_rejected():
    router = SimilarityRouter(Registry(), HashingEmbedder())
    with pytest.raises(EmptyPoolError):
        router.route("anything", "simple")


def test_abstain_margin_flags_near_ties():
    registry = make_pool(["pours the liquid", "pours the liquid"])
    router = SimilarityRouter(registry, HashingEmbedder(), abstain_margin=0.05)
    decision = router.route("pours the liquid", "simple")
    assert decision.abstained
    assert decision.expert_id == 0  # argmax still reported


def test_abstain_disabled_by_default():
    registry = make_pool(["pours the liquid", "pours the liquid"])
    router = SimilarityRouter(registry, HashingEmbedder())
    assert not router.route("pours the liquid", "simple").abstained


def test_determinism(registry):
    router = SimilarityRouter(registry, HashingEmbedder())
    a = router.route("put the bowl on the plate", "simple")
    b = router.route("put the bowl on the plate", "simple")
    assert a.expert_id == b.expert_id
    assert a.scores == b.scores
    assert a.abstained == b.abstained


WORDS = (
    "pick place pour sort stack wipe open close bowl plate cup pitcher can bin "
    "drawer window table tray black red small the a on into from over under"
).split()


def random_text(rng, min_words=1, max_words=7):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(min_words, max_words)))


def test_matches_brute_force_oracle_on_random_pools():
    rng = random.Random(7)
    embedder = HashingEmbedder(dim=64)
    for case in range(300):
        k = rng.randint(1, 10)
        descriptions = [random_text(rng) for _ in range(k)]
        if k >= 2 and case % 3 == 0:
            descriptions[rng.randrange(k)] = descriptions[0]  # force exact ties
        registry = make_pool(descriptions)
        router = SimilarityRouter(registry, embedder)
        task = random_text(rng)
        decision = router.route(task, "simple")

        task_vec = list(embedder.embed(task).values)
        expert_vecs = [(i, list(embedder.embed(d).values)) for i, d in enumerate(descriptions)]
        assert decision.expert_id == brute_force_argmax(task_vec, expert_vecs)


def test_argmax_invariant_under_uniform_scaling():
    rng = random.Random(13)
    for _ in range(50):
        k = rng.randint(2, 6)
        dim = 8
        mapping = {f"d{i}": [rng.uniform(-1, 1) for _ in range(dim)] for i in range(k)}
        mapping["task"] = [rng.uniform(-1, 1) for _ in range(dim)]
        registry = make_pool(list(mapping)[:k])
        base = SimilarityRouter(registry, FixedEmbedder(mapping, dim)).route("task", "simple")
        c = rng.uniform(0.01, 100.0)
        scaled_map = {k2: [c * x for x in v] for k2, v in mapping.items()}
        scaled = SimilarityRouter(registry, FixedEmbedder(scaled_map, dim)).route("task", "simple")
        assert base.expert_id == scaled.expert_id
