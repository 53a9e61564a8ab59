"""Service configuration.

Config files are plain ``key = value`` text; ``#`` starts a comment. Paths
are resolved relative to the config file's directory. Environment variables
override the listen address and backend URIs:

  MOE_ROUTER_LISTEN         listen address (host:port)
  MOE_ROUTER_EMBEDDING_URL  remote embedding service URI
  MOE_ROUTER_LM_URL         remote LM service URI
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .registry import DescriptionStyle
from .routing import RoutingStrategy
from .serving import DEFAULT_SWAP_LATENCY_MS, ServingMode

_KNOWN_KEYS = {
    "listen_address",
    "strategy",
    "style",
    "serving_mode",
    "backbone_bytes",
    "memory_budget_bytes",
    "swap_latency_ms",
    "registry",
    "prompt_template",
    "embedding_backend",
    "embedding_dim",
    "lm_backend",
    "few_shot",
    "abstain_margin",
    "dispatch_timeout_s",
    "event_log",
}


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8080"
    strategy: RoutingStrategy = RoutingStrategy.EMBEDDING_SIM
    style: DescriptionStyle = DescriptionStyle.SIMPLE
    serving_mode: ServingMode = ServingMode.ALL_IN_MEMORY
    backbone_bytes: int = 4_000_000_000
    memory_budget_bytes: int = 8_000_000_000
    swap_latency_ms: int = DEFAULT_SWAP_LATENCY_MS
    registry_path: Path | None = None
    prompt_template_path: Path | None = None
    # "builtin" or an http(s) URI of a remote embedding service
    embedding_backend: str = "builtin"
    embedding_dim: int = 256
    # "rules:<path>" for the deterministic mock, or an http(s) URI
    lm_backend: str | None = None
    few_shot_path: Path | None = None
    abstain_margin: float = 0.0
    dispatch_timeout_s: float = 60.0
    event_log_path: Path | None = None

    def validate(self) -> None:
        for label, path in (
            ("registry", self.registry_path),
            ("prompt_template", self.prompt_template_path),
            ("few_shot", self.few_shot_path),
        ):
            if path is not None and not path.exists():
                raise ConfigError(f"{label} file does not exist: {path}")
        if self.embedding_backend != "builtin" and not self.embedding_backend.startswith(
            ("http://", "https://")
        ):
            raise ConfigError(
                f"embedding_backend must be 'builtin' or an http(s) URI, got {self.embedding_backend!r}"
            )
        if self.lm_backend is not None:
            if self.lm_backend.startswith("rules:"):
                rules_path = Path(self.lm_backend[len("rules:") :])
                if not rules_path.exists():
                    raise ConfigError(f"LM rules file does not exist: {rules_path}")
            elif not self.lm_backend.startswith(("http://", "https://")):
                raise ConfigError(
                    f"lm_backend must be 'rules:<path>' or an http(s) URI, got {self.lm_backend!r}"
                )

    def lm_rules_path(self) -> Path | None:
        if self.lm_backend is not None and self.lm_backend.startswith("rules:"):
            return Path(self.lm_backend[len("rules:") :])
        return None


def _parse_kv_lines(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Load a config file (or defaults when ``path`` is None), then apply
    environment overrides and validate."""
    config = ServiceConfig()
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        base = path.parent
        values = _parse_kv_lines(path.read_text(encoding="utf-8"))
        unknown = set(values) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def resolve(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else base / p

        if "listen_address" in values:
            config.listen_address = values["listen_address"]
        if "strategy" in values:
            config.strategy = RoutingStrategy.parse(values["strategy"])
        if "style" in values:
            config.style = DescriptionStyle.parse(values["style"])
        if "serving_mode" in values:
            config.serving_mode = ServingMode.parse(values["serving_mode"])
        for int_key, attr in (
            ("backbone_bytes", "backbone_bytes"),
            ("memory_budget_bytes", "memory_budget_bytes"),
            ("swap_latency_ms", "swap_latency_ms"),
            ("embedding_dim", "embedding_dim"),
        ):
            if int_key in values:
                try:
                    setattr(config, attr, int(values[int_key]))
                except ValueError:
                    raise ConfigError(f"{int_key} must be an integer: {values[int_key]!r}") from None
        for float_key, attr in (
            ("abstain_margin", "abstain_margin"),
            ("dispatch_timeout_s", "dispatch_timeout_s"),
        ):
            if float_key in values:
                try:
                    setattr(config, attr, float(values[float_key]))
                except ValueError:
                    raise ConfigError(f"{float_key} must be a number: {values[float_key]!r}") from None
        if "registry" in values:
            config.registry_path = resolve(values["registry"])
        if "prompt_template" in values:
            config.prompt_template_path = resolve(values["prompt_template"])
        if "few_shot" in values:
            config.few_shot_path = resolve(values["few_shot"])
        if "event_log" in values:
            config.event_log_path = resolve(values["event_log"])
        if "embedding_backend" in values:
            config.embedding_backend = values["embedding_backend"]
        if "lm_backend" in values:
            backend = values["lm_backend"]
            if backend.startswith("rules:"):
                backend = "rules:" + str(resolve(backend[len("rules:") :]))
            config.lm_backend = backend

    if os.environ.get("MOE_ROUTER_LISTEN"):
        config.listen_address = os.environ["MOE_ROUTER_LISTEN"]
    if os.environ.get("MOE_ROUTER_EMBEDDING_URL"):
        config.embedding_backend = os.environ["MOE_ROUTER_EMBEDDING_URL"]
    if os.environ.get("MOE_ROUTER_LM_URL"):
        config.lm_backend = os.environ["MOE_ROUTER_LM_URL"]

    config.validate()
    return config
