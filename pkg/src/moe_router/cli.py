"""Command-line interface.

Subcommands: serve, route, execute, ingest (jsonl|bddl), eval (route|
robustness|serving). All emit JSON. Exit codes: 0 success, 1 usage,
2 validation/parse, 3 transport, 4 threshold failure.

Without --config, ./moe-router.ini is used when present so the bundled
fixtures work out of the box from the repository root.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import RouterError, TransportError
from .evaluation import run_robustness_eval, run_routing_eval
from .ingest import load_perturbation_pairs, parse_bddl, parse_tasks_jsonl
from .routing import RoutingStrategy
from .serving import ServingMode, plan_batches, schedule_swap_count
from .stack import ServiceStack, build_stack, route_fn_matrix
from .tasks import TaskInstruction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_TRANSPORT = 3
EXIT_THRESHOLD = 4

DEFAULT_CONFIG_NAME = "moe-router.ini"


class CliParser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1 for usage
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _error_payload(exc: RouterError) -> dict:
    payload: dict = {"error": {"code": exc.code, "message": str(exc)}}
    line = getattr(exc, "line", None)
    offset = getattr(exc, "offset", None)
    if line is not None:
        payload["error"]["line"] = line
    if offset is not None:
        payload["error"]["offset"] = offset
    return payload


def _stack_from_args(args) -> ServiceStack:
    config_path = args.config
    if config_path is None and Path(DEFAULT_CONFIG_NAME).exists():
        config_path = DEFAULT_CONFIG_NAME
    config = load_config(config_path)
    return build_stack(config)


def build_parser() -> CliParser:
    parser = CliParser(prog="moe-router", description=__doc__)
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized fixture generation")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.set_defaults(func=cmd_serve)

    route = sub.add_parser("route", help="route one task (no execution)")
    route.add_argument("--text", required=True)
    route.add_argument("--strategy", choices=[s.value for s in RoutingStrategy])
    route.add_argument("--style", choices=["simple", "abstract"])
    route.add_argument("--output")
    route.set_defaults(func=cmd_route)

    execute = sub.add_parser("execute", help="route and dispatch one task")
    execute.add_argument("--task-id", default="cli-task")
    execute.add_argument("--text", required=True)
    execute.add_argument("--strategy", choices=[s.value for s in RoutingStrategy])
    execute.add_argument("--style", choices=["simple", "abstract"])
    execute.add_argument("--output")
    execute.set_defaults(func=cmd_execute)

    ingest = sub.add_parser("ingest", help="parse task sources")
    ingest_sub = ingest.add_subparsers(dest="format", required=True)
    ingest_jsonl = ingest_sub.add_parser("jsonl")
    ingest_jsonl.add_argument("path")
    ingest_jsonl.add_argument("--output")
    ingest_jsonl.set_defaults(func=cmd_ingest_jsonl)
    ingest_bddl = ingest_sub.add_parser("bddl")
    ingest_bddl.add_argument("path")
    ingest_bddl.add_argument("--name", help="task id to assign (defaults to the file stem)")
    ingest_bddl.add_argument("--output")
    ingest_bddl.set_defaults(func=cmd_ingest_bddl)

    evaluate = sub.add_parser("eval", help="routing-quality and serving-cost reports")
    eval_sub = evaluate.add_subparsers(dest="report", required=True)

    eval_route = eval_sub.add_parser("route")
    eval_route.add_argument("--tasks", required=True, help="tasks .jsonl with category labels")
    eval_route.add_argument("--strategy", choices=[s.value for s in RoutingStrategy], default="embedding")
    eval_route.add_argument("--style", choices=["simple", "abstract"], default="simple")
    eval_route.add_argument("--min-f1", type=float)
    eval_route.add_argument("--output")
    eval_route.set_defaults(func=cmd_eval_route)

    eval_rob = eval_sub.add_parser("robustness")
    eval_rob.add_argument("--pairs", required=True, help="perturbation pairs JSON")
    eval_rob.add_argument("--strategies", default=None, help="comma-separated (default: all configured)")
    eval_rob.add_argument("--styles", default="simple,abstract")
    eval_rob.add_argument("--min-f1", type=float, help="threshold on each condition's original macro-F1")
    eval_rob.add_argument("--output")
    eval_rob.set_defaults(func=cmd_eval_robustness)

    eval_serving = eval_sub.add_parser("serving")
    eval_serving.add_argument("--tasks", required=True)
    eval_serving.add_argument("--strategy", choices=[s.value for s in RoutingStrategy], default="embedding")
    eval_serving.add_argument("--style", choices=["simple", "abstract"], default="simple")
    eval_serving.add_argument("--output")
    eval_serving.set_defaults(func=cmd_eval_serving)

    return parser


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    stack = _stack_from_args(args)
    host, _, port = stack.config.listen_address.rpartition(":")
    app = create_app(stack)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


def cmd_route(args) -> int:
    stack = _stack_from_args(args)
    decision = stack.executor.route(
        args.text, args.strategy or stack.config.strategy, args.style or stack.config.style
    )
    _emit(decision.to_json(), args.output)
    return EXIT_OK


def cmd_execute(args) -> int:
    stack = _stack_from_args(args)
    result = stack.executor.execute(
        TaskInstruction(task_id=args.task_id, text=args.text),
        args.strategy or stack.config.strategy,
        args.style or stack.config.style,
    )
    _emit(result.to_json(), args.output)
    return EXIT_OK


def cmd_ingest_jsonl(args) -> int:
    tasks = parse_tasks_jsonl(Path(args.path).read_bytes())
    _emit({"tasks": [t.to_json() for t in tasks]}, args.output)
    return EXIT_OK


def cmd_ingest_bddl(args) -> int:
    path = Path(args.path)
    task = parse_bddl(path.read_bytes(), args.name or path.stem)
    _emit({"task": task.to_json()}, args.output)
    return EXIT_OK


def cmd_eval_route(args) -> int:
    stack = _stack_from_args(args)
    tasks = parse_tasks_jsonl(Path(args.tasks).read_bytes())
    strategy = RoutingStrategy.parse(args.strategy)
    report = run_routing_eval(
        tasks,
        stack.registry,
        lambda text: stack.executor.route(text, strategy, args.style),
    )
    _emit(report.to_json(), args.output)
    if args.min_f1 is not None and report.macro_f1 < args.min_f1:
        print(f"macro_f1 {report.macro_f1:.6f} below threshold {args.min_f1}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_eval_robustness(args) -> int:
    stack = _stack_from_args(args)
    pairs = load_perturbation_pairs(Path(args.pairs).read_bytes())
    strategies = args.strategies.split(",") if args.strategies else None
    styles = args.styles.split(",")
    report = run_robustness_eval(
        pairs, stack.registry, route_fn_matrix(stack, strategies, styles)
    )
    _emit(report.to_json(), args.output)
    if args.min_f1 is not None:
        for condition in report.conditions:
            if condition.original.macro_f1 < args.min_f1:
                print(
                    f"{condition.strategy}/{condition.style} original macro_f1 "
                    f"{condition.original.macro_f1:.6f} below threshold {args.min_f1}",
                    file=sys.stderr,
                )
                return EXIT_THRESHOLD
    return EXIT_OK


def cmd_eval_serving(args) -> int:
    """Serving-cost analytics over a routed (not dispatched) task set."""
    stack = _stack_from_args(args)
    tasks = parse_tasks_jsonl(Path(args.tasks).read_bytes())
    strategy = RoutingStrategy.parse(args.strategy)
    assignments = []
    for task in tasks:
        decision = stack.executor.route(task.text, strategy, args.style)
        assignments.append((task.task_id, decision.expert_id))

    sizes = stack.registry.adapter_sizes()
    backbone = stack.config.backbone_bytes
    latency = stack.config.swap_latency_ms
    schedule = plan_batches(assignments)
    interleaved = [(expert_id, [task_id]) for task_id, expert_id in assignments]
    swaps_batched = schedule_swap_count(schedule, None, ServingMode.DYNAMIC_LOAD)
    swaps_unbatched = schedule_swap_count(interleaved, None, ServingMode.DYNAMIC_LOAD)
    n = max(1, len(assignments))
    payload = {
        "n_tasks": len(assignments),
        "all_in_memory": {
            "memory_used_bytes": backbone + sum(sizes.values()),
            "swap_count": 0,
            "amortized_swap_ms_per_task": 0.0,
        },
        "dynamic_load": {
            "memory_used_bytes_max": backbone + (max(sizes.values()) if sizes else 0),
            "swap_latency_ms": latency,
            "unbatched": {
                "swap_count": swaps_unbatched,
                "total_swap_ms": swaps_unbatched * latency,
                "amortized_swap_ms_per_task": swaps_unbatched * latency / n,
            },
            "batched": {
                "swap_count": swaps_batched,
                "total_swap_ms": swaps_batched * latency,
                "amortized_swap_ms_per_task": swaps_batched * latency / n,
            },
        },
    }
    _emit(payload, args.output)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return EXIT_TRANSPORT
    except RouterError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(json.dumps({"error": {"code": "file_not_found", "message": str(exc)}}), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
