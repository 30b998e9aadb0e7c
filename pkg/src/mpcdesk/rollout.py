"""Forward simulation of control plans over a finite horizon.

A rollout applies T controls from an initial state, recording states,
residuals, and risk-transformed running costs; the objective J is their
sum. Controls are clamped to the model bounds before being applied,
mirroring the final clamp the live agent performs on emitted actions, so
planner predictions match what would actually execute.

Batched variants stack many candidate rollouts into leading array
dimensions and advance them together; this is how candidate evaluation
is parallelized. Candidates that go numerically divergent score +inf
instead of raising, so one exploding sample never takes down a planner
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostSpec, base_cost_batch, risk_transform
from .models import Model, SimState
from .splines import SplinePlan, evaluate_many


@dataclass
class Rollout:
    """One simulated trajectory: aligned times, states, controls, costs."""

    times: np.ndarray      # (T,) simulation time at each step
    states: np.ndarray     # (T, nx) state vector [qpos, qvel] at each step
    controls: np.ndarray   # (T, nu) clamped controls actually applied
    residuals: np.ndarray  # (T, nr)
    costs: np.ndarray      # (T,) risk-transformed running costs
    diverged: bool = False

    @property
    def total_cost(self) -> float:
        if self.diverged:
            return float("inf")
        return float(np.sum(self.costs))

    @property
    def horizon(self) -> int:
        return self.times.shape[0]


def step_time_grid(t0: float, timestep: float, horizon: int) -> np.ndarray:
    """Simulation times t0, t0+h, ..., covering ``horizon`` steps."""
    return t0 + timestep * np.arange(horizon)


def rollout_controls(
    model: Model, state0: SimState, controls: np.ndarray, cost: CostSpec
) -> Rollout:
    """Roll out an explicit control sequence, shape (T, nu)."""
    batch = rollout_controls_batch(model, state0, controls[None], cost)
    return batch.single(0)


@dataclass
class BatchRollouts:
    """B candidate rollouts advanced together; arrays carry a leading B axis."""

    times: np.ndarray      # (T,)
    states: np.ndarray     # (B, T, nx)
    controls: np.ndarray   # (B, T, nu)
    residuals: np.ndarray  # (B, T, nr)
    costs: np.ndarray      # (B, T)
    objectives: np.ndarray  # (B,) with +inf for divergent candidates

    def single(self, i: int) -> Rollout:
        return Rollout(
            times=self.times,
            states=self.states[i],
            controls=self.controls[i],
            residuals=self.residuals[i],
            costs=self.costs[i],
            diverged=not np.isfinite(self.objectives[i]),
        )


def rollout_controls_batch(
    model: Model, state0: SimState, controls: np.ndarray, cost: CostSpec
) -> BatchRollouts:
    """Roll out B control sequences of shape (B, T, nu) from one state."""
    spec = model.spec
    controls = np.clip(
        np.asarray(controls, dtype=float), spec.control_lower, spec.control_upper
    )
    B, T, _ = controls.shape
    states = np.empty((B, T, spec.nx))
    residuals = np.empty((B, T, spec.nr))
    qpos = np.broadcast_to(state0.qpos, (B, spec.nq)).copy()
    qvel = np.broadcast_to(state0.qvel, (B, spec.nv)).copy()
    with np.errstate(all="ignore"):
        for t in range(T):
            states[:, t, : spec.nq] = qpos
            states[:, t, spec.nq :] = qvel
            residuals[:, t] = model.residual(qpos, qvel, controls[:, t])
            qpos, qvel = model.step_arrays(qpos, qvel, controls[:, t])
        costs = risk_transform(base_cost_batch(cost, residuals), cost.risk)
        objectives = np.sum(costs, axis=-1)
    objectives = np.where(np.isfinite(objectives), objectives, np.inf)
    return BatchRollouts(
        times=step_time_grid(state0.time, spec.timestep, T),
        states=states,
        controls=controls,
        residuals=residuals,
        costs=costs,
        objectives=objectives,
    )


def plan_controls(plan: SplinePlan, times: np.ndarray) -> np.ndarray:
    """Sample a spline plan on a step-time grid, shape (len(times), nu)."""
    return evaluate_many(plan, times)


def rollout_plan(
    model: Model, state0: SimState, plan: SplinePlan, cost: CostSpec, horizon: int
) -> Rollout:
    """Roll out a spline plan, querying it at each step's simulation time."""
    times = step_time_grid(state0.time, model.spec.timestep, horizon)
    return rollout_controls(model, state0, plan_controls(plan, times), cost)
