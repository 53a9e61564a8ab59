"""Task-source parsers: newline-delimited JSON metadata, Lisp-style task
definition files, and perturbation-pair files for robustness evaluation.

All parsers take bytes and require UTF-8. Field names for the JSONL format
follow this project's fixture convention (``task_id``, ``instruction``,
``category``) and can be remapped via ``field_map`` for foreign schemas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import ExtractionError, ParseError, SchemaError
from .sexpr import Node, StringLit, parse_sexpr_bytes
from .tasks import TaskInstruction

DEFAULT_FIELD_MAP = {"task_id": "task_id", "instruction": "instruction", "category": "category"}


def parse_tasks_jsonl(
    data: bytes,
    field_map: Mapping[str, str] | None = None,
) -> list[TaskInstruction]:
    """One TaskInstruction per non-blank line; ids are synthesized from the
    1-based line number when the id field is absent."""
    fields = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fields.update(field_map)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 at byte {exc.start}", offset=exc.start) from None

    tasks: list[TaskInstruction] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(obj, dict):
            raise SchemaError(f"line {lineno}: expected a JSON object", line=lineno)
        instruction = obj.get(fields["instruction"])
        if not isinstance(instruction, str) or not instruction.strip():
            raise SchemaError(
                f"line {lineno}: missing or empty {fields['instruction']!r} field", line=lineno
            )
        task_id = obj.get(fields["task_id"])
        if task_id is None:
            task_id = f"task-{lineno}"
        category = obj.get(fields["category"])
        tasks.append(
            TaskInstruction(
                task_id=str(task_id),
                text=instruction,
                truth_label=None if category is None else str(category),
            )
        )
    return tasks


def _iter_lists(node: Node) -> Iterator[list]:
    if isinstance(node, list):
        yield node
        for child in node:
            yield from _iter_lists(child)


def _clause_text(clause: list) -> str:
    body = clause[1:]
    if len(body) == 1 and isinstance(body[0], StringLit):
        return body[0].value
    parts = []
    for item in body:
        if isinstance(item, StringLit):
            parts.append(item.value)
        elif isinstance(item, str):
            parts.append(item)
    return " ".join(parts)


def parse_bddl(data: bytes, fallback_name: str) -> TaskInstruction:
    """Extract the task text from a Lisp-style task definition.

    A ``(:language ...)`` clause wins; otherwise the ``(problem ...)`` name
    is converted underscores-to-spaces. The truth label is left unset; the
    caller assigns it from the benchmark split.
    """
    forms = parse_sexpr_bytes(data)
    language_text: str | None = None
    problem_name: str | None = None
    for form in forms:
        for node in _iter_lists(form):
            if not node:
                continue
            head = node[0]
            if head == ":language" and language_text is None:
                text = _clause_text(node)
                if text.strip():
                    language_text = text
            elif head == "problem" and problem_name is None:
                if len(node) >= 2 and isinstance(node[1], str):
                    problem_name = node[1]
    if language_text is not None:
        return TaskInstruction(task_id=fallback_name, text=language_text)
    if problem_name is not None:
        return TaskInstruction(task_id=fallback_name, text=problem_name.replace("_", " "))
    raise ExtractionError("document has neither a :language clause nor a problem name")


@dataclass(frozen=True)
class PerturbationPair:
    """An original task plus semantically equivalent rephrasings, all
    sharing the original's truth label."""

    original: TaskInstruction
    perturbed: tuple[str, ...]

    def perturbed_instructions(self) -> list[TaskInstruction]:
        return [
            TaskInstruction(
                task_id=f"{self.original.task_id}-pert-{i}",
                text=text,
                truth_label=self.original.truth_label,
            )
            for i, text in enumerate(self.perturbed)
        ]


def load_perturbation_pairs(data: bytes) -> list[PerturbationPair]:
    """Parse a JSON array of {"original": {...}, "perturbed": ["...", ...]}."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 at byte {exc.start}", offset=exc.start) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, list):
        raise SchemaError("perturbation file must be a top-level JSON array")

    pairs: list[PerturbationPair] = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or "original" not in entry or "perturbed" not in entry:
            raise SchemaError(f"pair {i}: expected an object with 'original' and 'perturbed'")
        original = entry["original"]
        if not isinstance(original, dict):
            raise SchemaError(f"pair {i}: 'original' must be an object")
        instruction = original.get("instruction")
        if not isinstance(instruction, str) or not instruction.strip():
            raise SchemaError(f"pair {i}: original missing 'instruction'")
        perturbed = entry["perturbed"]
        if not isinstance(perturbed, list) or not perturbed:
            raise SchemaError(f"pair {i}: 'perturbed' must be a non-empty array")
        for j, rephrasing in enumerate(perturbed):
            if not isinstance(rephrasing, str) or not rephrasing.strip():
                raise SchemaError(f"pair {i}: rephrasing {j} must be a non-empty string")
        category = original.get("category")
        task = TaskInstruction(
            task_id=str(original.get("task_id", f"pair-{i}")),
            text=instruction,
            truth_label=None if category is None else str(category),
        )
        pairs.append(PerturbationPair(original=task, perturbed=tuple(perturbed)))
    return pairs
