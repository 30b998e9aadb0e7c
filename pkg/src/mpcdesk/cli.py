"""Command line entry points: serve the live cockpit gateway, run headless
benchmarks, list available tasks."""

from __future__ import annotations

import argparse
import sys

from .planners import PLANNER_KINDS
from .tasks import registry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpcdesk",
        description="Real-time predictive control sandbox for desk-scale models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    srv = sub.add_parser("serve", help="run the telemetry/command gateway")
    srv.add_argument("--task", default="pendulum-swingup")
    srv.add_argument("--planner", default="sampling", choices=PLANNER_KINDS)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8700)
    srv.add_argument("--slowdown", type=float, default=1.0,
                     help="wall seconds per simulated second (>= 1)")

    ben = sub.add_parser("bench", help="headless benchmark episode to CSV")
    ben.add_argument("--task", default="pendulum-swingup")
    ben.add_argument("--planner", default="sampling", choices=PLANNER_KINDS)
    ben.add_argument("--duration", type=float, default=10.0,
                     help="episode length in simulated seconds")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--out", required=True, help="per-step CSV output path")
    ben.add_argument("--sync", action=argparse.BooleanOptionalAction, default=True,
                     help="deterministic lockstep mode (default); "
                          "--no-sync runs the threaded real-time mode")

    sub.add_parser("list-tasks", help="print available task names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "list-tasks":
        for name, task in sorted(registry().items()):
            terms = ", ".join(t.name for t in task.cost.terms)
            print(f"{name}: model={task.model_name} terms=[{terms}]")
        return 0

    if args.command == "bench":
        from .bench import run_benchmark

        if args.task not in registry():
            print(f"unknown task {args.task!r}", file=sys.stderr)
            return 2
        summary = run_benchmark(
            args.task, args.planner, args.duration, args.seed, args.out,
            sync=args.sync,
        )
        for key, value in summary.row().items():
            print(f"{key}: {value}")
        return 0

    if args.command == "serve":
        from .server import serve

        if args.task not in registry():
            print(f"unknown task {args.task!r}", file=sys.stderr)
            return 2
        print(f"serving {args.task} with {args.planner} planner "
              f"on ws://{args.host}:{args.port}/ws")
        serve(args.task, args.planner, host=args.host, port=args.port,
              slowdown=args.slowdown)
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())
