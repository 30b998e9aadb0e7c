"""Zero-order planner: random search around the nominal spline.

Each iteration draws N-1 Gaussian perturbations of the knot values,
rolls every candidate out from the measured state, and keeps the
cheapest. The unmodified nominal is always candidate 0 and wins ties,
so under frozen state the objective can never get worse. Noise is
scaled per channel by the control range, which makes one sigma setting
meaningful across actuators with different units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..costs import CostSpec
from ..models import Model, SimState
from ..rollout import Rollout, rollout_controls_batch, rollout_plan, step_time_grid
from ..splines import SplinePlan, basis_matrix, clamp_params
from .base import PlanResult


@dataclass(frozen=True)
class SamplingConfig:
    """Settings for the random-search planner.

    noise is a fraction of each channel's control range (upper - lower),
    so 0.1 on a +/-2 Nm actuator means a 0.4 Nm standard deviation.
    """

    candidates: int = 10
    noise: float = 0.1
    horizon: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError("need at least one candidate (the nominal)")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least one step")


def sample_candidates(
    nominal: SplinePlan,
    config: SamplingConfig,
    rng: np.random.Generator,
    control_lower: np.ndarray,
    control_upper: np.ndarray,
) -> list[SplinePlan]:
    """Candidate 0 is the nominal; the rest add clamped knot noise.

    Each perturbed candidate draws from its own child stream, so the
    order candidates are later evaluated in cannot change what was
    sampled.
    """
    plans = [nominal]
    if config.candidates == 1:
        return plans
    scale = config.noise * (np.asarray(control_upper) - np.asarray(control_lower))
    streams = rng.spawn(config.candidates - 1)
    for stream in streams:
        noise = scale * stream.standard_normal(nominal.values.shape)
        perturbed = SplinePlan(nominal.times, nominal.values + noise, nominal.kind)
        plans.append(clamp_params(perturbed, control_lower, control_upper))
    return plans


def evaluate_candidate(
    candidate: SplinePlan,
    state: SimState,
    model: Model,
    cost: CostSpec,
    horizon: int,
) -> tuple[float, Rollout]:
    """Roll one spline plan out for ``horizon`` steps from ``state``."""
    rollout = rollout_plan(model, state, candidate, cost, horizon)
    return rollout.total_cost, rollout


def _evaluate_all(
    plans: list[SplinePlan],
    state: SimState,
    model: Model,
    cost: CostSpec,
    horizon: int,
):
    """Batch-roll all candidates; they share one knot grid, so one basis
    matrix maps every candidate's knot values to step controls."""
    times = step_time_grid(state.time, model.spec.timestep, horizon)
    phi = basis_matrix(plans[0], times)
    values = np.stack([p.values for p in plans])
    controls = np.einsum("tp,npu->ntu", phi, values)
    return rollout_controls_batch(model, state, controls, cost)


def improve(
    nominal: SplinePlan,
    state: SimState,
    model: Model,
    cost: CostSpec,
    config: SamplingConfig,
    rng: np.random.Generator,
) -> SplinePlan:
    """One random-search step; returns the best candidate plan."""
    return _improve_full(nominal, state, model, cost, config, rng).plan


def _improve_full(
    nominal: SplinePlan,
    state: SimState,
    model: Model,
    cost: CostSpec,
    config: SamplingConfig,
    rng: np.random.Generator,
) -> PlanResult:
    spec = model.spec
    plans = sample_candidates(
        nominal, config, rng, spec.control_lower, spec.control_upper
    )
    batch = _evaluate_all(plans, state, model, cost, config.horizon)
    best = int(np.argmin(batch.objectives))  # first minimum: nominal wins ties
    return PlanResult(
        plan=plans[best],
        rollout=batch.single(best),
        objective=float(batch.objectives[best]),
        nominal_objective=float(batch.objectives[0]),
        candidate_objectives=batch.objectives,
    )


class SamplingPlanner:
    """Stateful wrapper owning the RNG stream; one instance per agent."""

    kind = "sampling"

    def __init__(self, config: SamplingConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def improve(
        self, plan: SplinePlan, state: SimState, model: Model, cost: CostSpec
    ) -> PlanResult:
        return _improve_full(plan, state, model, cost, self.config, self.rng)
