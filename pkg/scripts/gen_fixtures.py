#!/usr/bin/env python3
"""Regenerate the bundled fixtures under fixtures/.

The routing suite is frozen only after verification: the builtin embedder
must route every clean task to its own expert under simple descriptions,
the keyword rule table must route every clean and perturbed task correctly,
and at least one perturbed rephrasing must misroute under embedding
similarity. The script fails loudly if an edit breaks any of that.

Parser fixtures (bddl/, tasks_jsonl/) ship with hand-written expected
manifests; tests compare parser output against them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from moe_router import HashingEmbedder, Registry, RuleBasedLmClient, SimilarityRouter  # noqa: E402
from moe_router.lm import LmRequest, build_prompt, parse_expert_index  # noqa: E402

EXPERTS = [
    dict(
        name="bowl-mover",
        meta_simple="picks up the black bowl and places it on the plate",
        meta_abstract="transports items between spatial zones",
        category_label="pick_place",
        adapter_id="adapter-pick-place",
        adapter_size_bytes=100_000_000,
        endpoint="http://expert-0.local/execute",
    ),
    dict(
        name="pour-specialist",
        meta_simple="pours liquid from the pitcher into the cup",
        meta_abstract="transfers contents between containers by tilting",
        category_label="pouring",
        adapter_id="adapter-pouring",
        adapter_size_bytes=100_000_000,
        endpoint="http://expert-1.local/execute",
    ),
    dict(
        name="can-sorter",
        meta_simple="sorts the cans into matching colored bins",
        meta_abstract="groups scattered objects into designated areas by kind",
        category_label="sorting",
        adapter_id="adapter-sorting",
        adapter_size_bytes=100_000_000,
        endpoint="http://expert-2.local/execute",
    ),
]

SUITE = {
    "pick_place": [
        "pick up the black bowl",
        "place the bowl on the plate",
        "move the black bowl onto the plate",
        "put the bowl on the white plate",
        "pick up the plate and stack the bowl on it",
        "set the black bowl down on the plate",
        "place the small bowl beside the plate",
        "pick the bowl up from the table and place it on the plate",
        "carry the black bowl over to the plate",
        "place both bowls on their plates",
    ],
    "pouring": [
        "pour the liquid into the cup",
        "pour water from the pitcher",
        "fill the cup from the pitcher",
        "pour the juice into the cup",
        "empty the pitcher into the cup",
        "pour the liquid from the pitcher slowly",
        "tilt the pitcher and pour into the cup",
        "pour half of the liquid into the cup",
        "fill both cups from the pitcher",
        "pour the remaining liquid from the pitcher into the cup",
    ],
    "sorting": [
        "sort the cans into the bins",
        "put each can into its matching bin",
        "sort the red cans into the red bin",
        "drop the cans into the correct bins",
        "sort all the cans by color into bins",
        "collect the cans and sort them into bins",
        "sort the green cans into the matching bin",
        "place every can in the matching colored bin",
        "sort the scattered cans into their bins",
        "gather the cans and put them into the right bins",
    ],
}

# (category, original suite text, rephrasings that avoid the simple-style
# keywords; the rule table below covers the synonyms)
PERTURBATIONS = [
    ("pick_place", "pick up the black bowl",
     ["grab the dark dish and lift it", "take hold of the dark dish"]),
    ("pick_place", "move the black bowl onto the plate",
     ["transfer the dark dish onto the serving surface",
      "shift the dark dish over to the serving surface"]),
    ("pouring", "pour the liquid into the cup",
     ["decant the drink into the mug", "tip the drink out into the mug"]),
    ("pouring", "fill the cup from the pitcher",
     ["top up the mug from the jug", "load the mug using the jug"]),
    ("sorting", "sort the cans into the bins",
     ["arrange the tins across the crates", "file the tins away into the crates"]),
    ("sorting", "put each can into its matching bin",
     ["slot every tin into its proper crate", "stow each tin in the right crate"]),
]

# Ordered, first match wins. "decant" must precede "can".
LM_RULES = [
    ("bowl", 0),
    ("plate", 0),
    ("dish", 0),
    ("pour", 1),
    ("pitcher", 1),
    ("decant", 1),
    ("mug", 1),
    ("jug", 1),
    ("cup", 1),
    ("sort", 2),
    ("bin", 2),
    ("can", 2),
    ("tin", 2),
    ("crate", 2),
]

BDDL_FILES = {
    "spatial_put_bowl.bddl": (
        "; tabletop manipulation task\n"
        "(define (problem put_the_black_bowl_on_the_plate)\n"
        "  (:domain kitchen_tabletop)\n"
        "  (:language \"put the black bowl on the plate\")\n"
        "  (:objects (bowl_1 - bowl) (plate_1 - plate))\n"
        "  (:init (on bowl_1 table))\n"
        "  (:goal (on bowl_1 plate_1)))\n"
    ),
    "goal_open_drawer.bddl": (
        "(define (problem open_the_top_drawer)\n"
        "  (:domain kitchen)\n"
        "  (:language open the top drawer of the cabinet)\n"
        "  (:goal (open drawer_top)))\n"
    ),
    "problem_name_only.bddl": (
        "(define (problem pick_up_the_black_bowl)\n"
        "  (:domain kitchen)\n"
        "  (:goal (holding bowl_1)))\n"
    ),
    "comments_heavy.bddl": (
        "; header comment\n"
        "(define (problem stack_the_cups) ; trailing comment\n"
        "  ; a full-line comment with (parens) and \"quotes\"\n"
        "  (:domain kitchen) ; another\n"
        "  (:language \"stack the cups on the tray\") ; note\n"
        ")\n"
    ),
    "nested_regions.bddl": (
        "(define (problem sort_cans_by_color)\n"
        "  (:domain sorting)\n"
        "  (:regions (bin_region (:target table) (:ranges ((0.1 0.2 0.3 0.4)))))\n"
        "  (:language sort the cans by color into the bins))\n"
    ),
    "escaped_string.bddl": (
        "(define (problem place_special_cup)\n"
        "  (:language \"place the \\\"special\\\" cup on the shelf\"))\n"
    ),
    "minimal_problem.bddl": "(define (problem wipe_table))\n",
    "unicode_language.bddl": (
        "(define (problem pour_cafe)\n"
        "  (:language \"pour the café au lait\"))\n"
    ),
    "malformed_unbalanced_open.bddl": "((",
    "malformed_extra_close.bddl": "(define (problem a)))",
    "malformed_no_text.bddl": "(define (:domain kitchen) (:objects (a - b)))\n",
    "unterminated_string.bddl": "(:language \"oops",
}

BDDL_EXPECTED = {
    "spatial_put_bowl.bddl": {"ok": True, "text": "put the black bowl on the plate"},
    "goal_open_drawer.bddl": {"ok": True, "text": "open the top drawer of the cabinet"},
    "problem_name_only.bddl": {"ok": True, "text": "pick up the black bowl"},
    "comments_heavy.bddl": {"ok": True, "text": "stack the cups on the tray"},
    "nested_regions.bddl": {"ok": True, "text": "sort the cans by color into the bins"},
    "escaped_string.bddl": {"ok": True, "text": 'place the "special" cup on the shelf'},
    "minimal_problem.bddl": {"ok": True, "text": "wipe table"},
    "unicode_language.bddl": {"ok": True, "text": "pour the café au lait"},
    "malformed_unbalanced_open.bddl": {"error": "parse_error", "offset": 2},
    "malformed_extra_close.bddl": {"error": "parse_error", "offset": 20},
    "malformed_no_text.bddl": {"error": "extraction_error"},
    "unterminated_string.bddl": {"error": "parse_error", "offset": 11},
}

TASKS_JSONL_FILES = {
    "gr1_tasks.jsonl": (
        '{"task_id":"p1","instruction":"pour the liquid","category":"arms_only"}\n'
        '{"task_id":"p2","instruction":"sort the cans","category":"arms_waist"}\n'
        '{"task_id":"p3","instruction":"stack the plates","category":"full_body"}\n'
    ),
    "no_ids.jsonl": (
        '{"instruction":"wipe the table"}\n'
        '{"instruction":"open the drawer"}\n'
    ),
    "no_category.jsonl": '{"task_id":"t1","instruction":"fold the towel"}\n',
    "blank_lines.jsonl": (
        '{"task_id":"a","instruction":"first"}\n'
        "\n"
        '{"task_id":"b","instruction":"second"}\n'
        "   \n"
    ),
    "empty.jsonl": "",
    "crlf.jsonl": (
        '{"task_id":"w1","instruction":"close the window"}\r\n'
        '{"task_id":"w2","instruction":"open the window"}\r\n'
    ),
    "unicode.jsonl": '{"task_id":"u1","instruction":"serve the café au lait","category":"pouring"}\n',
    "extra_fields.jsonl": (
        '{"task_id":"x1","instruction":"water the plant","category":"garden","episode":4,"scene":"s2"}\n'
    ),
    "numeric_ids.jsonl": '{"task_id":7,"instruction":"ring the bell"}\n',
    "custom_fields.jsonl": '{"id":"c1","text":"wipe the table","label":"cleaning"}\n',
    "malformed_line2.jsonl": (
        '{"task_id":"ok","instruction":"fine"}\n'
        "{not json\n"
    ),
    "missing_instruction.jsonl": '{"task_id":"x","category":"a"}\n',
}

TASKS_JSONL_EXPECTED = {
    "gr1_tasks.jsonl": {
        "ok": True,
        "tasks": [
            {"task_id": "p1", "text": "pour the liquid", "truth_label": "arms_only"},
            {"task_id": "p2", "text": "sort the cans", "truth_label": "arms_waist"},
            {"task_id": "p3", "text": "stack the plates", "truth_label": "full_body"},
        ],
    },
    "no_ids.jsonl": {
        "ok": True,
        "tasks": [
            {"task_id": "task-1", "text": "wipe the table", "truth_label": None},
            {"task_id": "task-2", "text": "open the drawer", "truth_label": None},
        ],
    },
    "no_category.jsonl": {
        "ok": True,
        "tasks": [{"task_id": "t1", "text": "fold the towel", "truth_label": None}],
    },
    "blank_lines.jsonl": {
        "ok": True,
        "tasks": [
            {"task_id": "a", "text": "first", "truth_label": None},
            {"task_id": "b", "text": "second", "truth_label": None},
        ],
    },
    "empty.jsonl": {"ok": True, "tasks": []},
    "crlf.jsonl": {
        "ok": True,
        "tasks": [
            {"task_id": "w1", "text": "close the window", "truth_label": None},
            {"task_id": "w2", "text": "open the window", "truth_label": None},
        ],
    },
    "unicode.jsonl": {
        "ok": True,
        "tasks": [{"task_id": "u1", "text": "serve the café au lait", "truth_label": "pouring"}],
    },
    "extra_fields.jsonl": {
        "ok": True,
        "tasks": [{"task_id": "x1", "text": "water the plant", "truth_label": "garden"}],
    },
    "numeric_ids.jsonl": {
        "ok": True,
        "tasks": [{"task_id": "7", "text": "ring the bell", "truth_label": None}],
    },
    "custom_fields.jsonl": {
        "ok": True,
        "field_map": {"task_id": "id", "instruction": "text", "category": "label"},
        "tasks": [{"task_id": "c1", "text": "wipe the table", "truth_label": "cleaning"}],
    },
    "malformed_line2.jsonl": {"error": "parse_error", "line": 2},
    "missing_instruction.jsonl": {"error": "schema_error", "line": 1},
}


def build_registry() -> Registry:
    registry = Registry()
    for fields in EXPERTS:
        registry.register(**fields)
    return registry


def verify_routing(registry: Registry) -> None:
    router = SimilarityRouter(registry, HashingEmbedder())
    cat_to_id = {fields["category_label"]: i for i, fields in enumerate(EXPERTS)}
    rules = RuleBasedLmClient(LM_RULES)
    catalog = registry.catalog("simple")

    def rule_route(text: str) -> int:
        prompt = build_prompt(text, catalog)
        return parse_expert_index(rules.complete(LmRequest(prompt=prompt)).text, len(catalog))

    for category, texts in SUITE.items():
        for text in texts:
            decision = router.route(text, "simple")
            assert decision.expert_id == cat_to_id[category], (
                f"clean suite not separable: {text!r} -> {decision.expert_id}"
            )
            assert rule_route(text) == cat_to_id[category], f"rule table misses clean {text!r}"

    embedding_misses = 0
    for category, original, rephrasings in PERTURBATIONS:
        assert router.route(original, "simple").expert_id == cat_to_id[category]
        for rephrasing in rephrasings:
            if router.route(rephrasing, "simple").expert_id != cat_to_id[category]:
                embedding_misses += 1
            assert rule_route(rephrasing) == cat_to_id[category], (
                f"rule table misses perturbed {rephrasing!r}"
            )
    assert embedding_misses > 0, "perturbations no longer break embedding routing"
    print(f"verified: clean 30/30 separable, rules exact, {embedding_misses} embedding misses on perturbed")


def write_all(fixtures_dir: Path) -> None:
    registry = build_registry()
    verify_routing(registry)

    fixtures_dir.mkdir(parents=True, exist_ok=True)
    registry.save(fixtures_dir / "registry.json")

    with (fixtures_dir / "suite.jsonl").open("w", encoding="utf-8") as handle:
        for category, texts in SUITE.items():
            for i, text in enumerate(texts):
                handle.write(
                    json.dumps(
                        {"task_id": f"{category}-{i:02d}", "instruction": text, "category": category}
                    )
                    + "\n"
                )

    pairs = []
    for category, original, rephrasings in PERTURBATIONS:
        index = SUITE[category].index(original)
        pairs.append(
            {
                "original": {
                    "task_id": f"{category}-{index:02d}",
                    "instruction": original,
                    "category": category,
                },
                "perturbed": rephrasings,
            }
        )
    (fixtures_dir / "perturbations.json").write_text(
        json.dumps(pairs, indent=2) + "\n", encoding="utf-8"
    )

    (fixtures_dir / "lm_rules.json").write_text(
        json.dumps(
            {
                "rules": [{"contains": kw, "expert_id": expert_id} for kw, expert_id in LM_RULES],
                "unmatched": "I am not sure",
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    bddl_dir = fixtures_dir / "bddl"
    bddl_dir.mkdir(exist_ok=True)
    for filename, content in BDDL_FILES.items():
        (bddl_dir / filename).write_bytes(content.encode("utf-8"))
    # one fixture must be byte-level invalid UTF-8, so write it raw
    (bddl_dir / "malformed_utf8.bddl").write_bytes(b"(define (problem caf\xe9))")
    expected = dict(BDDL_EXPECTED)
    expected["malformed_utf8.bddl"] = {"error": "parse_error", "offset": 20}
    (bddl_dir / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")

    jsonl_dir = fixtures_dir / "tasks_jsonl"
    jsonl_dir.mkdir(exist_ok=True)
    for filename, content in TASKS_JSONL_FILES.items():
        (jsonl_dir / filename).write_bytes(content.encode("utf-8"))
    (jsonl_dir / "malformed_utf8.jsonl").write_bytes(
        b'{"task_id":"z","instruction":"caf\xe9"}\n'
    )
    expected = dict(TASKS_JSONL_EXPECTED)
    expected["malformed_utf8.jsonl"] = {"error": "parse_error"}
    (jsonl_dir / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")

    print(f"fixtures written under {fixtures_dir}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO / "fixtures"))
    parser.add_argument("--seed", type=int, default=0, help="unused; fixtures are fully literal")
    args = parser.parse_args()
    write_all(Path(args.out))


if __name__ == "__main__":
    main()
