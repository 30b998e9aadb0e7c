"""Asynchronous control runtime: an agent loop stepping the simulation in
paced wall time and a planner loop continuously refining a shared plan.

The two loops communicate only through atomically published snapshots
(`SharedPlan`, `ClockState`, and the runtime's state snapshot), so neither
ever blocks on the other. The same single-step methods also run without
threads for deterministic benchmarking.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .costs import CostSpec, running_cost, term_values
from .models import Model, NumericalDivergence, SimState, step
from .planners import make_planner
from .planners.base import PlanResult, Planner
from .planners.ilqg import RegularizationLimit
from .splines import Interpolation, SplinePlan, evaluate, evaluate_many, resample
from .tasks import SuccessTracker, TaskSpec, check_transition


@dataclass(frozen=True)
class Event:
    """Discrete runtime occurrence forwarded to telemetry."""

    kind: str
    sim_time: float
    detail: dict = field(default_factory=dict)


class EventLog:
    """Bounded thread-safe event buffer; readers drain destructively."""

    def __init__(self, maxlen: int = 256):
        self._items: deque[Event] = deque(maxlen=maxlen)
        self._lock = threading.Lock()

    def append(self, kind: str, sim_time: float, **detail) -> None:
        with self._lock:
            self._items.append(Event(kind, sim_time, detail))

    def drain(self) -> list[Event]:
        with self._lock:
            items = list(self._items)
            self._items.clear()
        return items


class SharedPlan:
    """Single-writer plan slot with a strictly increasing generation counter.

    Readers get a consistent (plan, generation) pair; the plan object itself
    is immutable so a snapshot never observes a half-written update.
    """

    def __init__(self, plan: SplinePlan | None = None):
        self._lock = threading.Lock()
        self._plan = plan
        self._generation = 0
        self._published_wall = 0.0

    def publish(self, plan: SplinePlan) -> int:
        with self._lock:
            self._plan = plan
            self._generation += 1
            self._published_wall = time.monotonic()
            return self._generation

    def snapshot(self) -> tuple[SplinePlan | None, int]:
        with self._lock:
            return self._plan, self._generation

    @property
    def generation(self) -> int:
        with self._lock:
            return self._generation


class ClockState:
    """Simulation clock: sim_time plus the pacing controls (slowdown, paused).

    Slowdown s >= 1 means simulated time advances at 1/s of the wall rate,
    which buys the planner more iterations per simulated second.
    """

    def __init__(self, slowdown: float = 1.0, paused: bool = False):
        self._lock = threading.Lock()
        self._sim_time = 0.0
        self._slowdown = float(slowdown)
        self._paused = bool(paused)
        if self._slowdown < 1.0:
            raise ValueError("slowdown must be >= 1")

    def snapshot(self) -> tuple[float, float, bool]:
        with self._lock:
            return self._sim_time, self._slowdown, self._paused

    def set_sim_time(self, t: float) -> None:
        with self._lock:
            self._sim_time = float(t)

    def set_slowdown(self, value: float) -> None:
        if value < 1.0:
            raise ValueError("slowdown must be >= 1")
        with self._lock:
            self._slowdown = float(value)

    def set_paused(self, flag: bool) -> None:
        with self._lock:
            self._paused = bool(flag)

    @property
    def sim_time(self) -> float:
        with self._lock:
            return self._sim_time

    @property
    def slowdown(self) -> float:
        with self._lock:
            return self._slowdown

    @property
    def paused(self) -> bool:
        with self._lock:
            return self._paused


def action_from_policy(
    shared: SharedPlan,
    sim_time: float,
    control_lower: np.ndarray,
    control_upper: np.ndarray,
) -> np.ndarray:
    """Control to apply right now: the shared plan evaluated at sim_time,
    clamped to bounds. Before any plan has been published the midpoint of
    the bounds is emitted."""
    plan, generation = shared.snapshot()
    if generation < 1 or plan is None:
        return 0.5 * (control_lower + control_upper)
    return np.clip(evaluate(plan, sim_time), control_lower, control_upper)


def apply_perturbation(state: SimState, impulse: np.ndarray) -> SimState:
    """External shove modeled as an instantaneous velocity change."""
    impulse = np.asarray(impulse, dtype=float)
    if impulse.shape != state.qvel.shape:
        raise ValueError(
            f"impulse shape {impulse.shape} does not match qvel {state.qvel.shape}"
        )
    return SimState(qpos=state.qpos.copy(), qvel=state.qvel + impulse, time=state.time)


def shift_plan(plan: SplinePlan, sim_time: float) -> SplinePlan:
    """Warm-start shift: move the plan's grid forward so it covers sim_time,
    keeping its span.

    Step-lattice zero-hold plans roll forward by whole knot intervals, so
    every surviving value stays pinned to the absolute time it was planned
    for (re-sampling such a plan off-lattice would smear its phase).
    Continuous splines slide to start exactly at sim_time, reusing the
    values planned for the near future and holding the endpoint past the
    old grid."""
    times = plan.times
    if plan.kind is Interpolation.ZERO and times.size >= 2:
        spacing = np.diff(times)
        if np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-12):
            h = float(spacing[0])
            n = int(np.floor((sim_time - times[0]) / h + 1e-9))
            if n == 0:
                return plan
            if 0 < n <= times.size:
                held = np.repeat(plan.values[-1:], n, axis=0)
                values = np.concatenate([plan.values[n:], held])
                return SplinePlan(times + n * h, values, plan.kind)
    return resample(plan, sim_time + (times - times[0]))


def convert_plan(plan: SplinePlan, kind: str, task: TaskSpec, sim_time: float) -> SplinePlan:
    """Re-express the live plan in the representation the named planner
    expects (step-grid zero-hold for the direct planner, the task's knot
    spline otherwise), preserving the control trajectory it encodes."""
    template = task.initial_plan(kind, start_time=sim_time)
    values = evaluate_many(plan, template.times)
    return SplinePlan(template.times, values, template.kind)


class Runtime:
    """Owns one live episode: models, cost, planner, shared plan, and clock.

    All mutating entry points are safe to call from any thread. The
    agent/planner loops are optional; `agent_step` and `planner_iteration`
    can be driven directly for deterministic single-threaded runs.
    """

    def __init__(
        self,
        task: TaskSpec,
        planner_kind: str = "sampling",
        seed: int = 0,
        slowdown: float = 1.0,
    ):
        self._lock = threading.Lock()
        self.events = EventLog()
        self.clock = ClockState(slowdown=slowdown)
        self.seed = seed
        self._load(task, planner_kind, seed)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def _load(self, task: TaskSpec, planner_kind: str, seed: int) -> None:
        """(Re)build all episode state; callers hold no lock."""
        with self._lock:
            self.task = task
            self.planner_kind = planner_kind
            self.model_sim = task.sim_model()
            self.model_plan = self.model_sim.with_timestep(task.planner_timestep)
            self.cost = task.cost
            self.planner: Planner = task.build_planner(planner_kind, seed)
            self.state = task.initial_state(seed)
            self.goal_index = 0
            self.tracker = SuccessTracker(task)
            self.last_action = np.zeros(self.model_sim.spec.nu)
            self.last_result: PlanResult | None = None
            self.planner_stats = {"iterations": 0, "planning_ms": 0.0}
            self.shared = SharedPlan(task.initial_plan(planner_kind, 0.0))
        self.clock.set_sim_time(0.0)

    # ------------------------------------------------------------ snapshots

    def state_snapshot(self) -> SimState:
        with self._lock:
            return self.state.copy()

    def planning_inputs(self) -> tuple[SimState, Model, CostSpec, Planner]:
        with self._lock:
            return self.state.copy(), self.model_plan, self.cost, self.planner

    def stats_snapshot(self) -> dict:
        with self._lock:
            return dict(self.planner_stats)

    # ------------------------------------------------------ single-step drivers

    def agent_step(self) -> np.ndarray:
        """One simulation step: read the action from the shared plan, step
        the model, advance the clock, track success and goal transitions.
        Divergence resets the episode and logs an event."""
        with self._lock:
            model = self.model_sim
            state = self.state
        spec = model.spec
        u = action_from_policy(
            self.shared, state.time, spec.control_lower, spec.control_upper
        )
        try:
            new_state, _ = step(model, state, u)
        except NumericalDivergence as exc:
            self.events.append("reset", state.time, reason=f"divergence: {exc}")
            self.reset()
            return np.zeros(spec.nu)
        with self._lock:
            self.state = new_state
            self.last_action = u
            self.tracker.update(model, new_state, spec.timestep)
            nxt = check_transition(self.task, new_state, self.goal_index)
            if nxt is not None:
                self.goal_index = nxt
                goal = self.task.goal_array(nxt)
                self.model_sim = self.model_sim.with_goal(goal)
                self.model_plan = self.model_sim.with_timestep(
                    self.task.planner_timestep
                )
                self.tracker.record_transition(new_state.time)
                self.events.append(
                    "goal_transition", new_state.time, goal_index=nxt,
                    goal=goal.tolist(),
                )
        self.clock.set_sim_time(new_state.time)
        return u

    def planner_iteration(self) -> float:
        """One planner cycle: measure the state, shift the warm-start plan
        to now, run a single improve, publish. Returns the planning time in
        milliseconds (also recorded for telemetry)."""
        state, model, cost, planner = self.planning_inputs()
        plan, _ = self.shared.snapshot()
        if plan is None:
            plan = self.task.initial_plan(self.planner_kind, state.time)
        plan = shift_plan(plan, state.time)
        t0 = time.perf_counter()
        try:
            result = planner.improve(plan, state, model, cost)
        except (NumericalDivergence, RegularizationLimit, np.linalg.LinAlgError) as exc:
            self.events.append(
                "planner_error", state.time, planner=self.planner_kind,
                error=type(exc).__name__,
            )
            return 0.0
        ms = (time.perf_counter() - t0) * 1e3
        self.shared.publish(result.plan)
        with self._lock:
            self.last_result = result
            self.planner_stats["iterations"] += 1
            self.planner_stats["planning_ms"] = ms
        return ms

    # ------------------------------------------------------------ threaded loops

    def agent_loop(self, stop: threading.Event) -> None:
        """Paced stepping: each h-second sim step takes h * slowdown wall
        seconds; paused means no stepping (and no sim-time advance)."""
        deadline = time.monotonic()
        while not stop.is_set():
            _, slowdown, paused = self.clock.snapshot()
            if paused:
                time.sleep(0.005)
                deadline = time.monotonic()
                continue
            self.agent_step()
            deadline += self.model_sim.spec.timestep * slowdown
            now = time.monotonic()
            if deadline > now:
                time.sleep(deadline - now)
            else:
                # fell behind; do not bank unpayable debt
                deadline = now

    def planner_loop(self, stop: threading.Event) -> None:
        while not stop.is_set():
            self.planner_iteration()

    def start(self) -> None:
        if self._threads:
            raise RuntimeError("runtime already started")
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self.agent_loop, args=(self._stop,), daemon=True),
            threading.Thread(target=self.planner_loop, args=(self._stop,), daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=5.0)
        self._threads = []

    # ------------------------------------------------------------ commands

    def reset(self, seed: int | None = None) -> None:
        """Fresh episode: reseeded start state, zeroed plan, rebuilt planner
        (so adaptive internals start clean). The plan generation counter
        keeps increasing across resets."""
        if seed is not None:
            self.seed = seed
        with self._lock:
            task, kind = self.task, self.planner_kind
            shared = self.shared
            self.model_sim = task.sim_model()
            self.model_plan = self.model_sim.with_timestep(task.planner_timestep)
            self.state = task.initial_state(self.seed)
            self.goal_index = 0
            self.tracker = SuccessTracker(task)
            self.planner = task.build_planner(kind, self.seed)
            self.last_action = np.zeros(self.model_sim.spec.nu)
            self.last_result = None
        shared.publish(task.initial_plan(kind, 0.0))
        self.clock.set_sim_time(0.0)
        self.events.append("episode_reset", 0.0, seed=self.seed)

    def switch_planner(self, kind: str, seed: int | None = None) -> None:
        """Swap the active planner without stopping the agent; the live plan
        is converted to the new representation so behavior is continuous."""
        plan, _ = self.shared.snapshot()
        sim_time = self.clock.sim_time
        with self._lock:
            planner = self.task.build_planner(kind, self.seed if seed is None else seed)
            converted = convert_plan(plan, kind, self.task, sim_time)
            self.planner = planner
            self.planner_kind = kind
        self.shared.publish(converted)
        self.events.append("planner_switched", sim_time, planner=kind)

    def set_weight(self, term_name: str, weight: float) -> None:
        with self._lock:
            self.cost = self.cost.with_weight(term_name, weight)

    def set_risk(self, risk: float) -> None:
        with self._lock:
            self.cost = self.cost.with_risk(risk)

    def set_planner_setting(self, name: str, value) -> None:
        with self._lock:
            cfg = asdict(self.planner.config)
            if name not in cfg:
                raise ValueError(
                    f"planner {self.planner_kind!r} has no setting {name!r}"
                )
            # settings arriving over the wire are plain numbers; keep the
            # config field's original type (counts stay integers)
            if isinstance(cfg[name], int) and not isinstance(cfg[name], bool):
                value = int(value)
            cfg[name] = value
            self.planner = make_planner(self.planner_kind, **cfg)

    def set_slowdown(self, value: float) -> None:
        self.clock.set_slowdown(value)

    def set_paused(self, flag: bool) -> None:
        self.clock.set_paused(flag)

    def perturb(self, impulse: np.ndarray) -> None:
        with self._lock:
            self.state = apply_perturbation(self.state, impulse)
            t = self.state.time
        self.events.append("perturbation", t, impulse=np.asarray(impulse).tolist())

    def set_goal(self, goal: np.ndarray) -> None:
        goal = np.asarray(goal, dtype=float)
        with self._lock:
            if not hasattr(self.model_sim, "with_goal"):
                raise ValueError(
                    f"model {self.model_sim.spec.name!r} has no movable goal"
                )
            self.model_sim = self.model_sim.with_goal(goal)
            self.model_plan = self.model_sim.with_timestep(self.task.planner_timestep)
            t = self.state.time
        self.events.append("goal_set", t, goal=goal.tolist())

    def set_task(self, task: TaskSpec, planner_kind: str | None = None) -> None:
        kind = planner_kind or self.planner_kind
        was_running = bool(self._threads)
        if was_running:
            self.stop()
        self._load(task, kind, self.seed)
        self.events.append("task_loaded", 0.0, task=task.name)
        if was_running:
            self.start()

    # ------------------------------------------------------------ telemetry

    def telemetry(self) -> dict:
        """Everything the service layer needs for one frame, as plain data."""
        with self._lock:
            state = self.state.copy()
            action = self.last_action.copy()
            model = self.model_sim
            cost = self.cost
            result = self.last_result
            stats = dict(self.planner_stats)
            kind = self.planner_kind
            goal_index = self.goal_index
            succeeded = self.tracker.succeeded
        plan, generation = self.shared.snapshot()
        sim_time, slowdown, paused = self.clock.snapshot()
        r = model.residual(state.qpos, state.qvel, action)
        terms = term_values(cost, r)  # already weighted
        per_term = {t.name: float(v) for t, v in zip(cost.terms, terms)}
        out = {
            "sim_time": sim_time,
            "qpos": state.qpos.tolist(),
            "qvel": state.qvel.tolist(),
            "action": action.tolist(),
            "cost_terms": per_term,
            "total_cost": float(running_cost(cost, r)),
            "planner": kind,
            "planning_ms": stats["planning_ms"],
            "iterations": stats["iterations"],
            "generation": generation,
            "slowdown": slowdown,
            "paused": paused,
            "goal_index": goal_index,
            "succeeded": succeeded,
            "risk": cost.risk,
        }
        if result is not None:
            finite = [o for o in result.candidate_objectives if np.isfinite(o)]
            out["best_objective"] = float(result.objective)
            out["nominal_objective"] = float(result.nominal_objective)
            out["worst_objective"] = float(max(finite)) if finite else float("inf")
        if plan is not None:
            out["plan"] = plan
        return out
