#!/usr/bin/env python3
"""Routing-quality experiment over the bundled fixtures.

Evaluates both routers in both description styles on the clean suite and on
the perturbation pairs, printing a per-condition original/perturbed macro-F1
table plus the full confusion matrix for any condition that degrades.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from moe_router import (  # noqa: E402
    HashingEmbedder,
    Registry,
    RuleBasedLmClient,
    load_perturbation_pairs,
    parse_tasks_jsonl,
)
from moe_router.evaluation import run_robustness_eval, run_routing_eval  # noqa: E402
from moe_router.lm import LmRouter  # noqa: E402
from moe_router.routing import SimilarityRouter  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fixtures", default=str(REPO / "fixtures"))
    args = parser.parse_args()
    fixtures = Path(args.fixtures)

    registry = Registry.load(fixtures / "registry.json")
    tasks = parse_tasks_jsonl((fixtures / "suite.jsonl").read_bytes())
    pairs = load_perturbation_pairs((fixtures / "perturbations.json").read_bytes())

    similarity = SimilarityRouter(registry, HashingEmbedder())
    lm = LmRouter(registry, RuleBasedLmClient.from_file(fixtures / "lm_rules.json"))

    route_fns = {}
    for style in ("simple", "abstract"):
        route_fns[("embedding", style)] = lambda t, s=style: similarity.route(t, s)
        route_fns[("lm", style)] = lambda t, s=style: lm.route(t, s)

    print(f"clean suite: {len(tasks)} tasks, {len({t.truth_label for t in tasks})} categories")
    for (strategy, style), fn in route_fns.items():
        report = run_routing_eval(tasks, registry, fn)
        print(f"  {strategy + '/' + style:<20} macro_f1 = {report.macro_f1:.4f}")

    print(f"\nrobustness over {len(pairs)} perturbation pairs:")
    robustness = run_robustness_eval(pairs, registry, route_fns)
    print(robustness.to_text())

    for condition in robustness.conditions:
        if condition.delta_macro_f1 > 0:
            print(f"\nconfusion for degraded condition {condition.strategy}/{condition.style}:")
            print(condition.perturbed.to_text())


if __name__ == "__main__":
    main()
