"""Expert pool registry.

Experts are addressed by dense integer IDs assigned in registration order,
which keeps LM prompt parsing unambiguous ("Output: 0, 1, or 2"). Profiles
are immutable once registered; the registry is append-only.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from urllib.parse import urlparse

from .errors import DuplicateExpertError, EmptyPoolError, ExpertNotFoundError, ValidationError


class DescriptionStyle(enum.Enum):
    """Which flavor of meta-description a router reads.

    SIMPLE descriptions use literal task vocabulary ("picks and places the
    black bowl"); ABSTRACT ones use generalized intent language ("transports
    items between spatial zones").
    """

    SIMPLE = "simple"
    ABSTRACT = "abstract"

    @classmethod
    def parse(cls, value: "DescriptionStyle | str") -> "DescriptionStyle":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown description style: {value!r}") from None


@dataclass(frozen=True)
class ExpertProfile:
    """Identity, descriptions, adapter metadata, and endpoint of one expert."""

    expert_id: int
    name: str
    meta_simple: str
    meta_abstract: str
    category_label: str
    adapter_id: str
    adapter_size_bytes: int
    endpoint: str

    def description(self, style: DescriptionStyle) -> str:
        return self.meta_simple if style is DescriptionStyle.SIMPLE else self.meta_abstract

    def to_json(self) -> dict:
        return asdict(self)


def _validate_endpoint(endpoint: str) -> None:
    parsed = urlparse(endpoint)
    if not parsed.scheme:
        raise ValidationError(f"endpoint is not a valid URI (missing scheme): {endpoint!r}")
    if parsed.scheme in ("http", "https") and not parsed.netloc:
        raise ValidationError(f"endpoint is not a valid URI (missing host): {endpoint!r}")


class Registry:
    """Append-only pool of expert profiles with dense IDs 0..K-1.

    Registrations are serialized through a lock; reads are safe without one
    because profiles are immutable and the backing list only grows.
    """

    def __init__(self) -> None:
        self._profiles: list[ExpertProfile] = []
        self._names: set[str] = set()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._profiles)

    @property
    def size(self) -> int:
        return len(self._profiles)

    def register(
        self,
        *,
        name: str,
        meta_simple: str,
        meta_abstract: str,
        category_label: str,
        adapter_id: str,
        adapter_size_bytes: int,
        endpoint: str,
    ) -> int:
        """Validate and store a profile; returns the assigned expert_id."""
        if not name:
            raise ValidationError("expert name must be non-empty")
        if not meta_simple.strip():
            raise ValidationError("meta_simple must be non-empty")
        if not meta_abstract.strip():
            raise ValidationError("meta_abstract must be non-empty")
        if not isinstance(adapter_size_bytes, int) or adapter_size_bytes <= 0:
            raise ValidationError("adapter_size_bytes must be a positive integer")
        _validate_endpoint(endpoint)
        with self._lock:
            if name in self._names:
                raise DuplicateExpertError(f"expert name already registered: {name!r}")
            expert_id = len(self._profiles)
            profile = ExpertProfile(
                expert_id=expert_id,
                name=name,
                meta_simple=meta_simple,
                meta_abstract=meta_abstract,
                category_label=category_label,
                adapter_id=adapter_id,
                adapter_size_bytes=adapter_size_bytes,
                endpoint=endpoint,
            )
            self._profiles.append(profile)
            self._names.add(name)
        return expert_id

    def get(self, expert_id: int) -> ExpertProfile:
        if not isinstance(expert_id, int) or not 0 <= expert_id < len(self._profiles):
            raise ExpertNotFoundError(f"no expert with id {expert_id} (pool size {len(self._profiles)})")
        return self._profiles[expert_id]

    def profiles(self) -> tuple[ExpertProfile, ...]:
        return tuple(self._profiles)

    def catalog(self, style: DescriptionStyle | str) -> list[tuple[int, str]]:
        """(expert_id, description) pairs in id order for the given style."""
        style = DescriptionStyle.parse(style)
        if not self._profiles:
            raise EmptyPoolError("registry is empty")
        return [(p.expert_id, p.description(style)) for p in self._profiles]

    def adapter_sizes(self) -> dict[int, int]:
        return {p.expert_id: p.adapter_size_bytes for p in self._profiles}

    def category_labels(self) -> list[str]:
        return sorted({p.category_label for p in self._profiles})

    # Snapshot format: a top-level JSON array of profile objects.

    def to_json(self) -> list[dict]:
        return [p.to_json() for p in self._profiles]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, profiles: list[dict]) -> "Registry":
        registry = cls()
        for i, entry in enumerate(profiles):
            try:
                expert_id = registry.register(
                    name=entry["name"],
                    meta_simple=entry["meta_simple"],
                    meta_abstract=entry["meta_abstract"],
                    category_label=entry["category_label"],
                    adapter_id=entry["adapter_id"],
                    adapter_size_bytes=entry["adapter_size_bytes"],
                    endpoint=entry["endpoint"],
                )
            except KeyError as exc:
                raise ValidationError(f"registry entry {i} missing field {exc}") from None
            declared = entry.get("expert_id")
            if declared is not None and declared != expert_id:
                raise ValidationError(
                    f"registry entry {i} declares expert_id {declared} but dense order assigns {expert_id}"
                )
        return registry

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ValidationError("registry snapshot must be a top-level JSON array")
        return cls.from_json(data)
