"""Headless benchmark episodes with CSV output.

Two modes:
  synchronous: the planner runs exactly once between simulation steps;
    bit-deterministic for a given seed, so CI can compare whole files.
    Planning wall time is not meaningful here and is recorded as 0.0 to
    keep the bytes reproducible.
  asynchronous: agent and planner run as free-running threads at real
    pace; timing columns are real and the run is explicitly
    nondeterministic (flagged in the summary).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .agent import Runtime
from .costs import term_values, running_cost
from .tasks import TaskSpec, get_task


@dataclass(frozen=True)
class BenchmarkSummary:
    task: str
    planner: str
    mode: str
    deterministic: bool
    duration: float
    seed: int
    steps: int
    mean_cost_final_half: float
    success: bool
    csv_path: str

    def row(self) -> dict:
        return {
            "task": self.task,
            "planner": self.planner,
            "mode": self.mode,
            "deterministic": self.deterministic,
            "duration": self.duration,
            "seed": self.seed,
            "steps": self.steps,
            "mean_cost_final_half": self.mean_cost_final_half,
            "success": self.success,
        }


def _csv_header(task: TaskSpec) -> list[str]:
    return (
        ["sim_time", "total_cost"]
        + [f"cost_{t.name}" for t in task.cost.terms]
        + ["planning_ms"]
    )


def _cost_row(runtime: Runtime, action) -> tuple[float, list[float]]:
    model = runtime.model_sim
    state = runtime.state
    r = model.residual(state.qpos, state.qvel, action)
    per_term = term_values(runtime.cost, r)
    return float(running_cost(runtime.cost, r)), [float(v) for v in per_term]


def run_benchmark(
    task_name: str,
    planner_kind: str,
    duration: float,
    seed: int,
    out_path,
    sync: bool = True,
) -> BenchmarkSummary:
    """One headless episode; per-step CSV plus a one-row summary CSV.

    The summary lands next to the main file as ``<stem>_summary.csv``.
    """
    task = get_task(task_name)
    runtime = Runtime(task, planner_kind, seed=seed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    rows: list[list] = []
    if sync:
        h = runtime.model_sim.spec.timestep
        steps = round(duration / h)
        for _ in range(steps):
            runtime.planner_iteration()
            action = runtime.agent_step()
            total, per_term = _cost_row(runtime, action)
            rows.append([runtime.state.time, total] + per_term + [0.0])
    else:
        runtime.start()
        try:
            last_time = -1.0
            deadline = time.monotonic() + 10.0 * duration + 30.0
            while time.monotonic() < deadline:
                t = runtime.clock.sim_time
                if t >= duration:
                    break
                if t > last_time:
                    last_time = t
                    with runtime._lock:
                        action = runtime.last_action.copy()
                        ms = runtime.planner_stats["planning_ms"]
                    total, per_term = _cost_row(runtime, action)
                    rows.append([t, total] + per_term + [ms])
                time.sleep(0.002)
        finally:
            runtime.stop()

    header = _csv_header(task)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    totals = [r[1] for r in rows]
    tail = totals[len(totals) // 2 :]
    mean_tail = float(sum(tail) / len(tail)) if tail else math.nan
    summary = BenchmarkSummary(
        task=task_name,
        planner=planner_kind,
        mode="sync" if sync else "async",
        deterministic=bool(sync),
        duration=duration,
        seed=seed,
        steps=len(rows),
        mean_cost_final_half=mean_tail,
        success=runtime.tracker.succeeded,
        csv_path=str(out_path),
    )
    summary_path = out_path.with_name(out_path.stem + "_summary.csv")
    row = summary.row()
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(row))
        writer.writerow([row[k] for k in row])
    return summary
