"""Task instruction records shared by ingestion, routing, and execution."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TaskInstruction:
    """A single textual task, optionally labeled for evaluation."""

    task_id: str
    text: str
    truth_label: str | None = None

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "text": self.text, "truth_label": self.truth_label}
