"""Run the shim from the command line.

    expert-shim --port 8101 --rules rules.json --delay 0 --log received.jsonl
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import uvicorn

from .server import ShimConfig, create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="expert-shim", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8101)
    parser.add_argument("--rules", help="JSON rules file (adapter_id, rules, default, delay_ms)")
    parser.add_argument("--adapter-id", help="override the adapter id the shim claims to serve")
    parser.add_argument("--delay", type=int, help="override artificial response delay in ms")
    parser.add_argument("--log", help="JSON-lines file to append received tasks to")
    args = parser.parse_args(argv)

    overrides = {}
    if args.adapter_id:
        overrides["adapter_id"] = args.adapter_id
    if args.delay is not None:
        overrides["delay_ms"] = args.delay
    if args.log:
        overrides["log_path"] = Path(args.log)

    if args.rules:
        config = ShimConfig.from_file(args.rules, **overrides)
    else:
        config = ShimConfig(**overrides)

    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
