"""Task definitions: model + cost + planner defaults, loaded from JSON.

A task bundles everything an episode needs: which model to simulate,
the cost terms over its residual, the planning horizon and control-plan
shape, per-planner default settings, how episodes start, and what counts
as success. The built-in tasks live as one JSON file each under
``task_configs/``; weights and noise scales there are tuned constants
with the reasoning kept in the file's ``notes`` field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .costs import CostSpec, CostTerm, Norm, NormKind
from .models import Model, SimState, get_model
from .planners import make_planner
from .planners.base import Planner
from .splines import Interpolation, SplinePlan


@dataclass(frozen=True)
class SuccessSpec:
    """What counts as solving an episode.

    kinds:
      upright_angle: |angle(joint) - pi| stays under ``threshold`` rad
        for ``hold_seconds`` of continuous sim time.
      goal_transitions: at least ``count`` goal switches happen.
      residual_norm: the norm of the first ``slice_stop`` residual
        entries stays under ``threshold`` for ``hold_seconds``.
    """

    kind: str
    joint: int = 0
    threshold: float = 0.1
    hold_seconds: float = 2.0
    count: int = 1
    slice_stop: int = 1

    def __post_init__(self):
        if self.kind not in ("upright_angle", "goal_transitions", "residual_norm"):
            raise ValueError(f"unknown success kind {self.kind!r}")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    model_name: str
    cost: CostSpec
    horizon: int
    planner_timestep: float
    spline_kind: Interpolation
    knots: int
    success: SuccessSpec
    model_overrides: dict = field(default_factory=dict)
    planner_settings: dict = field(default_factory=dict)
    init_qpos: tuple = ()
    init_qvel: tuple = ()
    init_jitter: float = 0.0
    goals: tuple = ()
    goal_radius: float = 0.1
    notes: str = ""

    def sim_model(self) -> Model:
        model = get_model(self.model_name, **self.model_overrides)
        if self.goals:
            model = model.with_goal(np.array(self.goals[0]))
        return model

    def planner_model(self) -> Model:
        return self.sim_model().with_timestep(self.planner_timestep)

    def initial_state(self, seed: int | None = None) -> SimState:
        """Start state with seeded position jitter.

        The jitter is what makes a multi-seed evaluation meaningful for
        the deterministic planners, and it breaks the symmetry of
        exactly-hanging starts where gradients vanish.
        """
        model = self.sim_model()
        spec = model.spec
        qpos = np.zeros(spec.nq)
        qpos[: len(self.init_qpos)] = self.init_qpos
        qvel = np.zeros(spec.nv)
        qvel[: len(self.init_qvel)] = self.init_qvel
        if seed is not None and self.init_jitter > 0:
            rng = np.random.default_rng(seed)
            qpos = qpos + rng.normal(0.0, self.init_jitter, spec.nq)
        return SimState(qpos=qpos, qvel=qvel, time=0.0)

    def planner_horizon(self, kind: str) -> int:
        """Effective horizon for one planner: per-planner override if the
        config carries one, else the task default."""
        return int(self.planner_settings.get(kind, {}).get("horizon", self.horizon))

    def build_planner(self, kind: str, seed: int = 0) -> Planner:
        settings = dict(self.planner_settings.get(kind, {}))
        settings.setdefault("horizon", self.horizon)
        settings.setdefault("seed", seed)
        return make_planner(kind, **settings)

    def initial_plan(self, kind: str, start_time: float = 0.0) -> SplinePlan:
        """Fresh all-zeros plan (midpoint of bounds if zero is outside).

        Direct-sequence planners get a zero-order-hold plan on the step
        grid; spline planners get the task's knot grid. The grid spans the
        planner's own horizon so every knot stays inside the optimized
        window.
        """
        spec = self.sim_model().spec
        horizon = self.planner_horizon(kind)
        span = horizon * self.planner_timestep
        if kind == "ilqg":
            times = start_time + self.planner_timestep * np.arange(horizon)
            plan_kind = Interpolation.ZERO
        else:
            times = start_time + np.linspace(0.0, span, self.knots)
            plan_kind = self.spline_kind
        rest = rest_controls(spec.control_lower, spec.control_upper)
        values = np.tile(rest, (times.size, 1))
        return SplinePlan(times, values, plan_kind)

    def goal_array(self, index: int) -> np.ndarray:
        return np.array(self.goals[index % len(self.goals)])


def rest_controls(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-channel resting control: zero where the bounds allow it, else the
    midpoint of the admissible range."""
    return np.where((lower <= 0.0) & (0.0 <= upper), 0.0, 0.5 * (lower + upper))


def check_transition(task: TaskSpec, state: SimState, goal_index: int) -> int | None:
    """Next goal index if the state is within the capture radius, else None."""
    if not task.goals:
        return None
    goal = task.goal_array(goal_index)
    if np.linalg.norm(state.qpos[: goal.size] - goal) < task.goal_radius:
        return (goal_index + 1) % len(task.goals)
    return None


class SuccessTracker:
    """Accumulates the task's success signal over an episode."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self.held = 0.0
        self.transitions = 0
        self.achieved_at: float | None = None

    def update(self, model: Model, state: SimState, dt: float) -> None:
        s = self.task.success
        if s.kind == "goal_transitions":
            return  # fed via record_transition
        if s.kind == "upright_angle":
            angle = state.qpos[s.joint] - np.pi
            err = abs(np.angle(np.exp(1j * angle)))
        else:
            r = model.residual(state.qpos, state.qvel, np.zeros(model.spec.nu))
            err = float(np.linalg.norm(r[: s.slice_stop]))
        if err < s.threshold:
            self.held += dt
            if self.held >= s.hold_seconds and self.achieved_at is None:
                self.achieved_at = state.time
        else:
            self.held = 0.0

    def record_transition(self, sim_time: float) -> None:
        self.transitions += 1
        s = self.task.success
        if s.kind == "goal_transitions" and self.transitions >= s.count:
            if self.achieved_at is None:
                self.achieved_at = sim_time

    @property
    def succeeded(self) -> bool:
        return self.achieved_at is not None


# ------------------------------------------------------------ serialization

def _norm_to_dict(norm: NormKind) -> dict:
    out = {"kind": norm.kind.value, "param": norm.param}
    if norm.weight_matrix is not None:
        out["weight_matrix"] = norm.weight_matrix.tolist()
    return out


def _norm_from_dict(d: dict) -> NormKind:
    W = d.get("weight_matrix")
    return NormKind(
        Norm(d["kind"]), d.get("param", 1.0), None if W is None else np.array(W)
    )


def cost_to_dict(cost: CostSpec) -> dict:
    return {
        "risk": cost.risk,
        "terms": [
            {
                "name": t.name,
                "weight": t.weight,
                "norm": _norm_to_dict(t.norm),
                "start": t.start,
                "stop": t.stop,
            }
            for t in cost.terms
        ],
    }


def cost_from_dict(d: dict) -> CostSpec:
    return CostSpec(
        terms=tuple(
            CostTerm(
                t["name"], t["weight"], _norm_from_dict(t["norm"]), t["start"], t["stop"]
            )
            for t in d["terms"]
        ),
        risk=d.get("risk", 0.0),
    )


def task_to_dict(task: TaskSpec) -> dict:
    return {
        "name": task.name,
        "model": task.model_name,
        "model_overrides": dict(task.model_overrides),
        "cost": cost_to_dict(task.cost),
        "horizon": task.horizon,
        "planner_timestep": task.planner_timestep,
        "spline": task.spline_kind.value,
        "knots": task.knots,
        "planners": {k: dict(v) for k, v in task.planner_settings.items()},
        "init": {
            "qpos": list(task.init_qpos),
            "qvel": list(task.init_qvel),
            "jitter": task.init_jitter,
        },
        "goals": [list(g) for g in task.goals],
        "goal_radius": task.goal_radius,
        "success": {
            "kind": task.success.kind,
            "joint": task.success.joint,
            "threshold": task.success.threshold,
            "hold_seconds": task.success.hold_seconds,
            "count": task.success.count,
            "slice_stop": task.success.slice_stop,
        },
        "notes": task.notes,
    }


def task_from_dict(d: dict) -> TaskSpec:
    init = d.get("init", {})
    s = d["success"]
    return TaskSpec(
        name=d["name"],
        model_name=d["model"],
        model_overrides=d.get("model_overrides", {}),
        cost=cost_from_dict(d["cost"]),
        horizon=d["horizon"],
        planner_timestep=d["planner_timestep"],
        spline_kind=Interpolation(d.get("spline", "linear")),
        knots=d["knots"],
        planner_settings=d.get("planners", {}),
        init_qpos=tuple(init.get("qpos", ())),
        init_qvel=tuple(init.get("qvel", ())),
        init_jitter=init.get("jitter", 0.0),
        goals=tuple(tuple(g) for g in d.get("goals", ())),
        goal_radius=d.get("goal_radius", 0.1),
        success=SuccessSpec(
            kind=s["kind"],
            joint=s.get("joint", 0),
            threshold=s.get("threshold", 0.1),
            hold_seconds=s.get("hold_seconds", 2.0),
            count=s.get("count", 1),
            slice_stop=s.get("slice_stop", 1),
        ),
        notes=d.get("notes", ""),
    )


def task_to_json(task: TaskSpec) -> str:
    return json.dumps(task_to_dict(task), indent=2, sort_keys=True)


def task_from_json(text: str) -> TaskSpec:
    return task_from_dict(json.loads(text))


def registry() -> dict[str, TaskSpec]:
    """All built-in tasks, keyed by name, loaded from the packaged configs."""
    tasks = {}
    root = resources.files("mpcdesk") / "task_configs"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            task = task_from_json(entry.read_text())
            tasks[task.name] = task
    return tasks


def get_task(name: str) -> TaskSpec:
    tasks = registry()
    if name not in tasks:
        known = ", ".join(sorted(tasks))
        raise KeyError(f"unknown task {name!r}; available: {known}")
    return tasks[name]
