"""Wire protocol: JSON telemetry frames and the command set clients may
send back. Everything here is plain data with deterministic serialization;
the transport lives in server.py.

Schema versioning: every outbound message carries ``schema`` =
SCHEMA_VERSION; clients should ignore messages with a version they do not
understand.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .agent import Runtime
from .planners import PLANNER_KINDS
from .splines import SplinePlan, evaluate_many
from .tasks import registry

SCHEMA_VERSION = 1

PLAN_TRACE_POINTS = 50


class CommandError(Exception):
    """Rejected command; the runtime state is unchanged."""


@dataclass(frozen=True)
class TelemetryFrame:
    """One snapshot of the live system, ready for JSON transport.

    plan_times / plan_values are the published plan evaluated on a fixed
    50-point grid over its span, so clients never need spline math.
    """

    schema: int
    seq: int
    sim_time: float
    task: str
    qpos: list
    qvel: list
    action: list
    cost_terms: dict
    total_cost: float
    risk: float
    planner: str
    planning_ms: float
    iterations: int
    generation: int
    slowdown: float
    paused: bool
    goal_index: int
    succeeded: bool
    plan_times: list = field(default_factory=list)
    plan_values: list = field(default_factory=list)
    best_objective: float | None = None
    worst_objective: float | None = None
    nominal_objective: float | None = None
    events: list = field(default_factory=list)


def _jsonable(value):
    """Clamp non-finite floats to None so output stays strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def plan_trace(plan: SplinePlan, points: int = PLAN_TRACE_POINTS):
    """Downsample a plan to a fixed-size preview for clients."""
    t0, t1 = float(plan.times[0]), float(plan.times[-1])
    if t1 <= t0:
        ts = np.full(points, t0)
    else:
        ts = np.linspace(t0, t1, points)
    values = evaluate_many(plan, ts)
    return ts.tolist(), values.tolist()


def frame_from_runtime(runtime: Runtime, seq: int) -> TelemetryFrame:
    data = runtime.telemetry()
    events = [
        {"kind": e.kind, "sim_time": e.sim_time, "detail": _jsonable(e.detail)}
        for e in runtime.events.drain()
    ]
    plan = data.pop("plan", None)
    plan_times: list = []
    plan_values: list = []
    if plan is not None:
        plan_times, plan_values = plan_trace(plan)
    return TelemetryFrame(
        schema=SCHEMA_VERSION,
        seq=seq,
        sim_time=data["sim_time"],
        task=runtime.task.name,
        qpos=data["qpos"],
        qvel=data["qvel"],
        action=data["action"],
        cost_terms=data["cost_terms"],
        total_cost=data["total_cost"],
        risk=data["risk"],
        planner=data["planner"],
        planning_ms=data["planning_ms"],
        iterations=data["iterations"],
        generation=data["generation"],
        slowdown=data["slowdown"],
        paused=data["paused"],
        goal_index=data["goal_index"],
        succeeded=data["succeeded"],
        plan_times=plan_times,
        plan_values=plan_values,
        best_objective=data.get("best_objective"),
        worst_objective=data.get("worst_objective"),
        nominal_objective=data.get("nominal_objective"),
        events=events,
    )


def encode_frame(frame: TelemetryFrame) -> str:
    payload = _jsonable(asdict(frame))
    payload["type"] = "telemetry"
    return json.dumps(payload, sort_keys=True, allow_nan=False)


def decode_frame(text: str) -> TelemetryFrame:
    data = json.loads(text)
    if data.get("type") != "telemetry":
        raise ValueError(f"not a telemetry message: {data.get('type')!r}")
    data.pop("type")
    return TelemetryFrame(**data)


# ------------------------------------------------------------------ commands

COMMAND_TYPES = (
    "set_weight",
    "set_risk",
    "set_planner",
    "set_planner_setting",
    "set_slowdown",
    "pause",
    "resume",
    "perturb",
    "set_task",
    "set_goal",
    "reset",
)


def _require(data: dict, key: str, kinds, what: str):
    if key not in data:
        raise CommandError(f"{data.get('type')}: missing field {key!r}")
    value = data[key]
    if not isinstance(value, kinds):
        raise CommandError(f"{data.get('type')}: field {key!r} must be {what}")
    return value


def _number(data: dict, key: str) -> float:
    value = _require(data, key, (int, float), "a number")
    if isinstance(value, bool):
        raise CommandError(f"{data.get('type')}: field {key!r} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise CommandError(f"{data.get('type')}: field {key!r} must be finite")
    return value


def _vector(data: dict, key: str) -> list[float]:
    raw = _require(data, key, list, "a list of numbers")
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise CommandError(f"{data.get('type')}: field {key!r} must be numeric")
        if not math.isfinite(float(v)):
            raise CommandError(f"{data.get('type')}: field {key!r} must be finite")
        out.append(float(v))
    return out


def apply_command(runtime: Runtime, data: dict) -> dict:
    """Validate one decoded command against the live runtime and apply it.

    Returns an acknowledgment detail dict (the authoritative post-apply
    values, which clients mirror). Raises CommandError without touching
    the runtime if anything is off.
    """
    if not isinstance(data, dict):
        raise CommandError("command must be a JSON object")
    ctype = data.get("type")
    if ctype not in COMMAND_TYPES:
        raise CommandError(f"unknown command type {ctype!r}")

    if ctype == "set_weight":
        term = _require(data, "term", str, "a string")
        value = _number(data, "value")
        if value < 0:
            raise CommandError("set_weight: weight must be >= 0")
        if term not in runtime.cost.term_names():
            raise CommandError(
                f"set_weight: no term {term!r} in task {runtime.task.name!r}"
            )
        runtime.set_weight(term, value)
        return {"term": term, "value": value}

    if ctype == "set_risk":
        value = _number(data, "value")
        runtime.set_risk(value)
        return {"value": value}

    if ctype == "set_planner":
        kind = _require(data, "kind", str, "a string")
        if kind not in PLANNER_KINDS:
            raise CommandError(
                f"set_planner: unknown kind {kind!r}; have {list(PLANNER_KINDS)}"
            )
        runtime.switch_planner(kind)
        return {"kind": kind}

    if ctype == "set_planner_setting":
        name = _require(data, "name", str, "a string")
        value = _number(data, "value")
        try:
            runtime.set_planner_setting(name, value)
        except ValueError as exc:
            raise CommandError(f"set_planner_setting: {exc}")
        return {"name": name, "value": value, "planner": runtime.planner_kind}

    if ctype == "set_slowdown":
        value = _number(data, "value")
        try:
            runtime.set_slowdown(value)
        except ValueError as exc:
            raise CommandError(f"set_slowdown: {exc}")
        return {"value": value}

    if ctype == "pause":
        runtime.set_paused(True)
        return {"paused": True}

    if ctype == "resume":
        runtime.set_paused(False)
        return {"paused": False}

    if ctype == "perturb":
        impulse = _vector(data, "impulse")
        nv = runtime.model_sim.spec.nv
        if len(impulse) != nv:
            raise CommandError(f"perturb: impulse needs {nv} entries, got {len(impulse)}")
        runtime.perturb(np.array(impulse))
        return {"impulse": impulse}

    if ctype == "set_task":
        name = _require(data, "name", str, "a string")
        tasks = registry()
        if name not in tasks:
            raise CommandError(f"set_task: unknown task {name!r}")
        runtime.set_task(tasks[name])
        return control_surface(runtime)

    if ctype == "set_goal":
        goal = _vector(data, "goal")
        try:
            runtime.set_goal(np.array(goal))
        except ValueError as exc:
            raise CommandError(f"set_goal: {exc}")
        return {"goal": goal}

    if ctype == "reset":
        seed = data.get("seed")
        if seed is not None:
            if isinstance(seed, bool) or not isinstance(seed, int):
                raise CommandError("reset: seed must be an integer")
        runtime.reset(seed)
        return {"seed": runtime.seed}

    raise CommandError(f"unhandled command type {ctype!r}")  # pragma: no cover


def encode_ack(command_id, status: str, command_type: str, detail: dict) -> str:
    payload = {
        "type": "ack",
        "schema": SCHEMA_VERSION,
        "id": command_id,
        "status": status,
        "command": command_type,
        "detail": _jsonable(detail),
    }
    return json.dumps(payload, sort_keys=True, allow_nan=False)


def control_surface(runtime: Runtime) -> dict:
    """Everything a client needs to build its controls for the active task.

    Sent in the hello and again in the set_task acknowledgment, since a
    task switch replaces the model dimensions and the cost terms.
    """
    task = runtime.task
    return {
        "task": task.name,
        "planner": runtime.planner_kind,
        "terms": [
            {"name": t.name, "weight": t.weight} for t in runtime.cost.terms
        ],
        "risk": runtime.cost.risk,
        "slowdown": runtime.clock.slowdown,
        "nv": runtime.model_sim.spec.nv,
        "nu": runtime.model_sim.spec.nu,
        "control_lower": runtime.model_sim.spec.control_lower.tolist(),
        "control_upper": runtime.model_sim.spec.control_upper.tolist(),
        "goals": [list(g) for g in task.goals],
    }


def hello_message(runtime: Runtime) -> str:
    """Session opener: control surface plus the catalog of alternatives."""
    payload = {
        "type": "hello",
        "schema": SCHEMA_VERSION,
        "tasks": sorted(registry()),
        "planners": list(PLANNER_KINDS),
        **control_surface(runtime),
    }
    return json.dumps(payload, sort_keys=True, allow_nan=False)
