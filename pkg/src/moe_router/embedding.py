"""Deterministic text embeddings and cosine similarity.

The built-in embedder is a signed feature-hashing bag-of-features model:

  1. normalize: lowercase, treat punctuation/underscores as spaces, collapse
     whitespace (tokens are maximal runs of unicode letters and digits);
  2. featurize each token as a word unigram plus the character trigrams of
     the boundary-padded token ("<bowl>" -> "<bo", "bow", "owl", "wl>");
  3. hash every feature with FNV-1a 64-bit under a pinned seed; the hash
     parity picks the sign, the remaining bits pick one of D buckets;
  4. accumulate term-frequency weights and L2-normalize.

Features are counted as a bag, so texts with identical token multisets embed
identically. The hash is fixed, so vectors are reproducible across builds
and processes. Texts that normalize to no tokens embed to the zero vector.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import httpx
import numpy as np

from .errors import DimensionMismatchError, EmptyPoolError, ProtocolError, TransportError
from .registry import DescriptionStyle

DEFAULT_DIM = 256

# FNV-1a 64-bit, seeded by absorbing 8 fixed bytes before the payload.
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_FNV64_MASK = 0xFFFFFFFFFFFFFFFF
HASH_SEED = 0x9E3779B97F4A7C15
_SEED_BYTES = HASH_SEED.to_bytes(8, "little")

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def fnv1a64(data: bytes, seed_bytes: bytes = _SEED_BYTES) -> int:
    h = _FNV64_OFFSET
    for byte in seed_bytes + data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _FNV64_MASK
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Embedding:
    """A fixed-length real vector; ``values`` has length ``dim``."""

    values: np.ndarray
    dim: int

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "Embedding":
        arr = np.asarray(values, dtype=np.float64)
        return cls(values=arr, dim=arr.shape[0])


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity in [-1, 1]; defined as 0 when either norm is 0."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"embedding dims differ: {a.dim} != {b.dim}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a.values, b.values) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


class Embedder(Protocol):
    """Anything that maps text to fixed-dimension vectors."""

    dim: int

    def embed(self, text: str) -> Embedding: ...

    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]: ...

    def fingerprint_params(self) -> dict: ...


class HashingEmbedder:
    """Dependency-free deterministic embedder (see module docstring)."""

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = HASH_SEED) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._seed_bytes = seed.to_bytes(8, "little", signed=False)
        # feature -> (bucket, sign); purely derived from the fixed hash, so
        # memoizing is safe under concurrent use and changes no output
        self._memo: dict[str, tuple[int, float]] = {}

    @staticmethod
    def features(text: str) -> Counter:
        feats: Counter = Counter()
        for token in tokenize(text):
            feats[f"u:{token}"] += 1
            padded = f"<{token}>"
            for i in range(len(padded) - 2):
                feats[f"c:{padded[i : i + 3]}"] += 1
        return feats

    def embed(self, text: str) -> Embedding:
        vec = np.zeros(self.dim, dtype=np.float64)
        feats = self.features(text)
        if not feats:
            return Embedding(values=vec, dim=self.dim)
        for feature, count in feats.items():
            slot = self._memo.get(feature)
            if slot is None:
                h = fnv1a64(feature.encode("utf-8"), self._seed_bytes)
                slot = ((h >> 1) % self.dim, 1.0 if h & 1 == 0 else -1.0)
                self._memo[feature] = slot
            bucket, sign = slot
            vec[bucket] += sign * count
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return Embedding(values=vec, dim=self.dim)

    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]:
        return [self.embed(t) for t in texts]

    def fingerprint_params(self) -> dict:
        return {"backend": "hashing", "dim": self.dim, "seed": self.seed}


class RemoteEmbedder:
    """Client for an external embedding service.

    Protocol: POST {"texts": [...]} -> {"embeddings": [[...], ...], "dim": D}.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.dim = -1  # learned from the first response
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]:
        try:
            response = self._client.post(self.endpoint, json={"texts": list(texts)})
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"embedding service returned HTTP {response.status_code}")
        try:
            body = response.json()
            rows = body["embeddings"]
            dim = int(body["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed embedding response: {exc}") from exc
        if len(rows) != len(texts):
            raise ProtocolError(f"asked for {len(texts)} embeddings, got {len(rows)}")
        out = []
        for row in rows:
            if len(row) != dim:
                raise ProtocolError(f"inconsistent dimensions in batch: {len(row)} != {dim}")
            out.append(Embedding.from_values(row))
        self.dim = dim
        return out

    def embed(self, text: str) -> Embedding:
        return self.embed_batch([text])[0]

    def fingerprint_params(self) -> dict:
        return {"backend": "remote", "endpoint": self.endpoint}


def remote_embed(texts: Sequence[str], endpoint: str, **kwargs) -> list[Embedding]:
    return RemoteEmbedder(endpoint, **kwargs).embed_batch(texts)


@dataclass
class EmbeddingCache:
    """Embeddings of one catalog's descriptions, keyed by expert_id.

    ``catalog_fingerprint`` hashes the (id, description) list, the style, and
    the embedder parameters; routers reject the cache when the live catalog
    no longer matches.
    """

    style: DescriptionStyle
    entries: dict[int, Embedding]
    catalog_fingerprint: str


def catalog_fingerprint(
    catalog: Iterable[tuple[int, str]],
    style: DescriptionStyle,
    embedder_params: dict,
) -> str:
    payload = json.dumps(
        {"catalog": [[i, d] for i, d in catalog], "style": style.value, "embedder": embedder_params},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_cache(
    catalog: Sequence[tuple[int, str]],
    style: DescriptionStyle | str,
    embedder: Embedder,
) -> EmbeddingCache:
    """Embed every catalog description; one entry per expert."""
    style = DescriptionStyle.parse(style)
    if not catalog:
        raise EmptyPoolError("cannot build an embedding cache from an empty catalog")
    embeddings = embedder.embed_batch([desc for _, desc in catalog])
    entries = {expert_id: emb for (expert_id, _), emb in zip(catalog, embeddings)}
    return EmbeddingCache(
        style=style,
        entries=entries,
        catalog_fingerprint=catalog_fingerprint(catalog, style, embedder.fingerprint_params()),
    )
