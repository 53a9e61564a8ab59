"""Routing-quality evaluation: confusion matrices, macro-averaged F1,
original-vs-perturbed robustness comparison, and serving-cost summaries.

Conventions: zero-support and zero-prediction classes contribute F1 = 0 to
the macro average. Abstentions and routing failures land in a dedicated
"unrouted" predicted column (predicted label None) and count as false
negatives for their truth class, so the confusion matrix always sums to the
number of tasks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import RouterError, ValidationError
from .executor import ExecutionResult
from .ingest import PerturbationPair
from .registry import Registry
from .routing import RoutingDecision
from .serving import AdapterManager
from .tasks import TaskInstruction

UNROUTED = None  # predicted-label sentinel for abstain/failure


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts and per-class scores over one prediction set.

    ``confusion`` rows follow ``classes`` order; columns are ``classes``
    plus a trailing "unrouted" column.
    """

    classes: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    per_class: tuple[ClassMetrics, ...]
    macro_f1: float
    n_tasks: int

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "columns": list(self.classes) + ["unrouted"],
            "confusion": [list(row) for row in self.confusion],
            "per_class": [
                {"class": c, "precision": m.precision, "recall": m.recall, "f1": m.f1}
                for c, m in zip(self.classes, self.per_class)
            ],
            "macro_f1": self.macro_f1,
            "n_tasks": self.n_tasks,
        }

    def to_text(self) -> str:
        """Aligned-column rendering of the confusion matrix and scores."""
        columns = list(self.classes) + ["unrouted"]
        width = max(12, max((len(c) for c in columns), default=0) + 2)
        lines = []
        header = "truth \\ pred".ljust(width) + "".join(c.rjust(width) for c in columns)
        lines.append(header)
        for truth, row in zip(self.classes, self.confusion):
            lines.append(truth.ljust(width) + "".join(str(v).rjust(width) for v in row))
        lines.append("")
        lines.append(
            "class".ljust(width)
            + "precision".rjust(width)
            + "recall".rjust(width)
            + "f1".rjust(width)
        )
        for cls, metrics in zip(self.classes, self.per_class):
            lines.append(
                cls.ljust(width)
                + f"{metrics.precision:.4f}".rjust(width)
                + f"{metrics.recall:.4f}".rjust(width)
                + f"{metrics.f1:.4f}".rjust(width)
            )
        lines.append("")
        lines.append(f"macro_f1 = {self.macro_f1:.6f}  (n = {self.n_tasks})")
        return "\n".join(lines)


def macro_f1(
    predictions: Sequence[tuple[str, str | None]],
    classes: Sequence[str],
) -> EvalReport:
    """Build an EvalReport from (truth_label, predicted_label_or_None) pairs.

    Per-class precision and recall fall back to 0 when their denominators
    are 0; the macro average is the unweighted mean over ``classes``,
    zero-support classes included.
    """
    classes = list(classes)
    if len(set(classes)) != len(classes):
        raise ValidationError("classes must be unique")
    index = {label: i for i, label in enumerate(classes)}
    k = len(classes)
    confusion = np.zeros((k, k + 1), dtype=np.int64)
    for truth, predicted in predictions:
        if truth not in index:
            raise ValidationError(f"unknown truth label: {truth!r}")
        if predicted is UNROUTED:
            col = k
        elif predicted in index:
            col = index[predicted]
        else:
            raise ValidationError(f"unknown predicted label: {predicted!r}")
        confusion[index[truth], col] += 1

    per_class = []
    row_sums = confusion.sum(axis=1)
    col_sums = confusion[:, :k].sum(axis=0)
    for i in range(k):
        tp = int(confusion[i, i])
        fp = int(col_sums[i]) - tp
        fn = int(row_sums[i]) - tp
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        per_class.append(ClassMetrics(precision=precision, recall=recall, f1=f1))

    macro = float(np.mean([m.f1 for m in per_class])) if per_class else 0.0
    return EvalReport(
        classes=tuple(classes),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        per_class=tuple(per_class),
        macro_f1=macro,
        n_tasks=len(predictions),
    )


RouteFn = Callable[[str], RoutingDecision]


def run_routing_eval(
    tasks: Sequence[TaskInstruction],
    registry: Registry,
    route_fn: RouteFn,
    classes: Sequence[str] | None = None,
) -> EvalReport:
    """Route every task (no dispatch) and score predicted categories.

    The chosen expert_id maps to its profile's category_label; routing
    errors and abstentions count as unrouted.
    """
    for task in tasks:
        if task.truth_label is None:
            raise ValidationError(f"task {task.task_id!r} has no truth_label")
    if classes is None:
        labels = set(registry.category_labels()) | {t.truth_label for t in tasks}
        classes = sorted(labels)

    predictions: list[tuple[str, str | None]] = []
    for task in tasks:
        try:
            decision = route_fn(task.text)
            predicted = None if decision.abstained else registry.get(decision.expert_id).category_label
        except RouterError:
            predicted = None
        predictions.append((task.truth_label, predicted))
    return macro_f1(predictions, classes)


@dataclass(frozen=True)
class ConditionReport:
    """Original vs. perturbed scores for one (strategy, style) condition."""

    strategy: str
    style: str
    original: EvalReport
    perturbed: EvalReport
    pooled: EvalReport
    delta_macro_f1: float

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "style": self.style,
            "original_macro_f1": self.original.macro_f1,
            "perturbed_macro_f1": self.perturbed.macro_f1,
            "pooled_macro_f1": self.pooled.macro_f1,
            "delta_macro_f1": self.delta_macro_f1,
            "original": self.original.to_json(),
            "perturbed": self.perturbed.to_json(),
        }


@dataclass(frozen=True)
class RobustnessReport:
    conditions: tuple[ConditionReport, ...]
    outcome_metric_deltas: Mapping[str, float] | None = None

    def to_json(self) -> dict:
        return {
            "conditions": [c.to_json() for c in self.conditions],
            "outcome_metric_deltas": dict(self.outcome_metric_deltas)
            if self.outcome_metric_deltas
            else None,
        }

    def to_text(self) -> str:
        width = 14
        lines = [
            "condition".ljust(24)
            + "orig".rjust(width)
            + "pert".rjust(width)
            + "pooled".rjust(width)
            + "delta".rjust(width)
        ]
        for c in self.conditions:
            lines.append(
                f"{c.strategy}/{c.style}".ljust(24)
                + f"{c.original.macro_f1:.4f}".rjust(width)
                + f"{c.perturbed.macro_f1:.4f}".rjust(width)
                + f"{c.pooled.macro_f1:.4f}".rjust(width)
                + f"{c.delta_macro_f1:+.4f}".rjust(width)
            )
        return "\n".join(lines)


def run_robustness_eval(
    pairs: Sequence[PerturbationPair],
    registry: Registry,
    route_fns: Mapping[tuple[str, str], RouteFn],
) -> RobustnessReport:
    """Evaluate each (strategy, style) route function on the originals and on
    every rephrasing; reports per-condition macro-F1, the pooled score over
    both sets, and the original-minus-perturbed delta."""
    if not pairs:
        raise ValidationError("no perturbation pairs given")
    originals = [p.original for p in pairs]
    perturbed: list[TaskInstruction] = []
    for pair in pairs:
        perturbed.extend(pair.perturbed_instructions())

    labels = set(registry.category_labels())
    labels.update(t.truth_label for t in originals if t.truth_label is not None)
    classes = sorted(labels)

    conditions = []
    for (strategy, style), route_fn in route_fns.items():
        original_report = run_routing_eval(originals, registry, route_fn, classes)
        perturbed_report = run_routing_eval(perturbed, registry, route_fn, classes)
        pooled_report = run_routing_eval(originals + perturbed, registry, route_fn, classes)
        conditions.append(
            ConditionReport(
                strategy=strategy,
                style=style,
                original=original_report,
                perturbed=perturbed_report,
                pooled=pooled_report,
                delta_macro_f1=original_report.macro_f1 - perturbed_report.macro_f1,
            )
        )
    return RobustnessReport(conditions=tuple(conditions))


@dataclass(frozen=True)
class ServingSummary:
    mode: str
    n_tasks: int
    swap_count: int
    total_swap_ms: int
    amortized_swap_ms_per_task: float
    peak_memory_bytes: int

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "n_tasks": self.n_tasks,
            "swap_count": self.swap_count,
            "total_swap_ms": self.total_swap_ms,
            "amortized_swap_ms_per_task": self.amortized_swap_ms_per_task,
            "peak_memory_bytes": self.peak_memory_bytes,
        }


def serving_report(results: Sequence[ExecutionResult], manager: AdapterManager) -> ServingSummary:
    """Totals over a finished run: swap count, swap milliseconds, amortized
    cost per task, and the manager's peak memory."""
    swaps = [r.swap for r in results if r.swap is not None]
    total_swap_ms = sum(s.duration_ms for s in swaps)
    n = len(results)
    return ServingSummary(
        mode=manager.mode.value,
        n_tasks=n,
        swap_count=len(swaps),
        total_swap_ms=total_swap_ms,
        amortized_swap_ms_per_task=total_swap_ms / n if n else 0.0,
        peak_memory_bytes=manager.peak_memory_bytes,
    )
