"""Expert-side reference server for the router wire protocol.

Accepts POST {"task_id", "text", "adapter_id"} and answers
{"status": "success"|"failure", "metric_name", "metric_value",
"trajectory_b64"} after an optional artificial delay. Outcomes come from an
ordered substring rule table with a mandatory default, standing in for real
policy inference; a wrapper around an actual model replaces only the lookup.

Every received task is appended to a conformance log (in memory, plus a
JSON-lines file when configured) so a driving test suite can assert dispatch
order and payload fidelity.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse


@dataclass(frozen=True)
class OutcomeRule:
    contains: str
    status: str
    metric_name: str
    metric_value: float

    def outcome(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "metric_name": self.metric_name,
            "metric_value": self.metric_value,
        }


@dataclass
class ShimConfig:
    adapter_id: str = "adapter-shim"
    rules: list[OutcomeRule] = field(default_factory=list)
    default: OutcomeRule = OutcomeRule("", "failure", "sr", 0.0)
    delay_ms: int = 0
    log_path: Path | None = None

    def __post_init__(self) -> None:
        if self.delay_ms < 0:
            raise ValueError("delay_ms must be >= 0")
        for rule in [*self.rules, self.default]:
            if rule.status not in ("success", "failure"):
                raise ValueError(f"rule status must be success|failure, got {rule.status!r}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ShimConfig":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        default = spec.get("default", {})
        kwargs: dict[str, Any] = {
            "adapter_id": spec.get("adapter_id", "adapter-shim"),
            "rules": [
                OutcomeRule(
                    contains=r["contains"],
                    status=r["status"],
                    metric_name=r["metric_name"],
                    metric_value=float(r["metric_value"]),
                )
                for r in spec.get("rules", [])
            ],
            "default": OutcomeRule(
                "",
                default.get("status", "failure"),
                default.get("metric_name", "sr"),
                float(default.get("metric_value", 0.0)),
            ),
            "delay_ms": int(spec.get("delay_ms", 0)),
        }
        kwargs.update(overrides)
        return cls(**kwargs)

    def lookup(self, text: str) -> OutcomeRule:
        lowered = text.lower()
        for rule in self.rules:
            if rule.contains.lower() in lowered:
                return rule
        return self.default


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"error": {"code": "protocol_error", "message": message}},
    )


def create_app(config: ShimConfig) -> FastAPI:
    app = FastAPI(title="expert-shim")
    log: list[dict[str, Any]] = []
    origin = time.monotonic()

    def now_ms() -> int:
        return int((time.monotonic() - origin) * 1000)

    app.state.config = config
    app.state.log = log

    @app.post("/")
    @app.post("/execute")
    async def serve_execute(request: Request):
        received_at = now_ms()
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body is not JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        for field_name in ("task_id", "text", "adapter_id"):
            if field_name not in body or not isinstance(body[field_name], str):
                return _bad_request(f"missing or non-string field {field_name!r}")

        rule = config.lookup(body["text"])
        if config.delay_ms:
            time.sleep(config.delay_ms / 1000)

        entry = {
            "task_id": body["task_id"],
            "text": body["text"],
            "adapter_id": body["adapter_id"],  # recorded verbatim, mismatches included
            "received_at_ms": received_at,
            "responded_at_ms": now_ms(),
        }
        log.append(entry)
        if config.log_path is not None:
            with config.log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry) + "\n")

        return {
            **rule.outcome(),
            "trajectory_b64": base64.b64encode(body["task_id"].encode()).decode("ascii"),
        }

    @app.get("/log")
    def conformance_log():
        return {"entries": list(log)}

    @app.get("/health")
    def health():
        return {"status": "ok", "adapter_id": config.adapter_id}

    return app
