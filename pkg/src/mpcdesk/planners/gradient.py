"""First-order planner: adjoint sweep plus a parallel line search.

The total objective's gradient with respect to the control sequence
comes from a backward co-state recursion over the rollout's linearized
dynamics:

    lam_T = 0
    lam_t = dc/dx_t + A_t' lam_{t+1}
    dJ/du_t = dc/du_t + B_t' lam_{t+1}

The control-sequence gradient is then chained onto the spline knots
through the interpolation basis (the plan is linear in its knot values),
and a log-spaced step-size grid is rolled out in one batch. The
unmodified nominal is always in the candidate set, so a bad gradient
step can be rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..costs import CostSpec, cost_gradient_batch
from ..models import Model, NumericalDivergence, SimState, linearize_trajectory
from ..rollout import Rollout, rollout_controls_batch, rollout_plan, step_time_grid
from ..splines import SplinePlan, basis_matrix, clamp_params
from .base import PlanResult


@dataclass(frozen=True)
class GradientConfig:
    alpha_min: float = 1e-4
    alpha_max: float = 1.0
    num_alphas: int = 10
    horizon: int = 40
    seed: int = 0  # unused; kept so all planner configs build the same way

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha_max")
        if self.num_alphas < 1:
            raise ValueError("need at least one step size")
        if self.horizon < 1:
            raise ValueError("horizon must be at least one step")

    def alphas(self) -> np.ndarray:
        if self.num_alphas == 1:
            return np.array([self.alpha_max])
        return np.geomspace(self.alpha_min, self.alpha_max, self.num_alphas)


@dataclass
class CostateSweep:
    """Backward-recursion output: co-states and the control gradient."""

    lam: np.ndarray   # (T+1, nx); terminal row is zero
    dJdu: np.ndarray  # (T, nu)


def costate_sweep(rollout: Rollout, jacobians, cost: CostSpec) -> CostateSweep:
    """Backward co-state recursion along a rollout.

    jacobians is the (A, B, C, D) stack from linearize_trajectory,
    aligned with the rollout. Raises NumericalDivergence if the
    recursion leaves the finite range, so the caller can fall back to
    the nominal plan.
    """
    A, B, C, D = jacobians
    T = rollout.horizon
    nx, nu = A.shape[2], B.shape[2]
    with np.errstate(over="ignore"):
        dcdx, dcdu = cost_gradient_batch(cost, rollout.residuals, C, D)
    lam = np.zeros((T + 1, nx))
    dJdu = np.zeros((T, nu))
    for t in range(T - 1, -1, -1):
        dJdu[t] = dcdu[t] + B[t].T @ lam[t + 1]
        lam[t] = dcdx[t] + A[t].T @ lam[t + 1]
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(dJdu))):
        raise NumericalDivergence("co-state sweep left the finite range")
    return CostateSweep(lam=lam, dJdu=dJdu)


def chain_to_params(
    dJdu: np.ndarray, plan: SplinePlan, step_times: np.ndarray
) -> np.ndarray:
    """Map the per-step control gradient onto the knot values.

    Controls are phi @ theta with phi the (T, P) basis matrix, so the
    knot gradient is phi' @ dJdu, shape (P, nu).
    """
    phi = basis_matrix(plan, step_times)
    return phi.T @ np.asarray(dJdu)


def improve(
    nominal: SplinePlan,
    state: SimState,
    model: Model,
    cost: CostSpec,
    config: GradientConfig,
) -> SplinePlan:
    """One gradient step with line search; never worse under frozen state."""
    return _improve_full(nominal, state, model, cost, config).plan


def _improve_full(
    nominal: SplinePlan,
    state: SimState,
    model: Model,
    cost: CostSpec,
    config: GradientConfig,
) -> PlanResult:
    spec = model.spec
    base = rollout_plan(model, state, nominal, cost, config.horizon)
    if base.diverged:
        return PlanResult(nominal, base, base.total_cost, base.total_cost)
    try:
        jac = linearize_trajectory(
            model, base.states[:, : spec.nq], base.states[:, spec.nq :], base.controls
        )
        sweep = costate_sweep(base, jac, cost)
        grad = chain_to_params(sweep.dJdu, nominal, base.times)
    except NumericalDivergence:
        return PlanResult(nominal, base, base.total_cost, base.total_cost)
    if not np.any(grad):
        return PlanResult(nominal, base, base.total_cost, base.total_cost)

    candidates = [nominal]
    for alpha in config.alphas():
        stepped = SplinePlan(nominal.times, nominal.values - alpha * grad, nominal.kind)
        candidates.append(
            clamp_params(stepped, spec.control_lower, spec.control_upper)
        )
    times = step_time_grid(state.time, spec.timestep, config.horizon)
    phi = basis_matrix(nominal, times)
    controls = np.einsum("tp,npu->ntu", phi, np.stack([p.values for p in candidates]))
    batch = rollout_controls_batch(model, state, controls, cost)
    best = int(np.argmin(batch.objectives))  # nominal is index 0, wins ties
    return PlanResult(
        plan=candidates[best],
        rollout=batch.single(best),
        objective=float(batch.objectives[best]),
        nominal_objective=float(batch.objectives[0]),
        candidate_objectives=batch.objectives,
    )


class GradientPlanner:
    kind = "gradient"

    def __init__(self, config: GradientConfig):
        self.config = config

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def improve(
        self, plan: SplinePlan, state: SimState, model: Model, cost: CostSpec
    ) -> PlanResult:
        return _improve_full(plan, state, model, cost, self.config)
