"""Second-order planner: Gauss-Newton dynamic programming with feedback.

Works on the direct control sequence u_0..u_{T-1} rather than spline
knots. Each iteration linearizes the dynamics along the nominal rollout,
builds quadratic cost blocks (Gauss-Newton, so no second residual
derivatives), and runs a backward recursion on the Q-function blocks:

    Qx  = cx + A' Vx          Qu  = cu + B' Vx
    Qxx = cxx + A' Vxx A      Quu = cuu + B' Vxx B
    Qux = cxu' + B' Vxx A

    k = -(Quu + mu I)^-1 Qu       K = -(Quu + mu I)^-1 Qux

The resulting time-varying affine policy u = u_nom + K (x - x_nom) + a*k
is rolled out for a halving grid of step sizes a, all in one batch, and
the cheapest trajectory becomes the new nominal. Control bounds are
handled by clamping u_nom + k and zeroing feedback rows for clamped
coordinates; the forward rollout clamps again as a backstop.

Regularization: mu is added to Quu only. If the Cholesky factorization
fails the pass retries with mu * 10; past mu_max the iteration aborts
and the nominal is kept. mu halves after a successful iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..costs import CostSpec, cost_quadratics_batch, psd_project_batch
from ..models import Model, NumericalDivergence, SimState, linearize_trajectory
from ..rollout import (
    BatchRollouts,
    Rollout,
    rollout_controls,
    step_time_grid,
)
from ..splines import Interpolation, SplinePlan, evaluate_many
from .base import PlanResult


class RegularizationLimit(RuntimeError):
    """Quu could not be made positive definite below mu_max."""


@dataclass(frozen=True)
class ILQGConfig:
    horizon: int = 40
    mu_init: float = 1.0
    mu_min: float = 1e-6
    mu_max: float = 1e6
    alpha_min: float = 0.01
    seed: int = 0  # unused; kept so all planner configs build the same way

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least one step")
        if not 0 < self.mu_min <= self.mu_init <= self.mu_max:
            raise ValueError("need 0 < mu_min <= mu_init <= mu_max")
        if not 0 < self.alpha_min <= 1:
            raise ValueError("alpha_min must lie in (0, 1]")

    def alphas(self) -> np.ndarray:
        """Step-size grid 1, 1/2, 1/4, ... down to alpha_min."""
        out = [1.0]
        while out[-1] / 2 >= self.alpha_min:
            out.append(out[-1] / 2)
        return np.array(out)


@dataclass
class FeedbackPolicy:
    """Time-varying affine policy around a nominal trajectory."""

    times: np.ndarray   # (T,)
    x_nom: np.ndarray   # (T, nx)
    u_nom: np.ndarray   # (T, nu)
    K: np.ndarray       # (T, nu, nx) feedback gains
    k: np.ndarray       # (T, nu) improvement steps, bound-feasible

    @property
    def horizon(self) -> int:
        return self.times.shape[0]


def _cost_blocks(cost: CostSpec, rollout: Rollout, C: np.ndarray, D: np.ndarray):
    """Per-step gradient and Gauss-Newton Hessian stacks along a rollout.

    The Hessian blocks cxx and cuu are projected to be positive
    semidefinite; negative risk can make the rank-one term indefinite
    and the backward pass needs convex stage costs.
    """
    with np.errstate(over="ignore"):
        cx, cu, cxx, cuu, cxu = cost_quadratics_batch(
            cost, rollout.residuals, C, D
        )
        cxx = psd_project_batch(cxx)
        cuu = psd_project_batch(cuu)
    stacks = (cx, cu, cxx, cuu, cxu)
    if not all(np.all(np.isfinite(s)) for s in stacks):
        raise NumericalDivergence("non-finite cost derivatives along rollout")
    return stacks


def _backward_once(rollout, A, B, blocks, mu, lower, upper):
    """One backward sweep at fixed mu; raises LinAlgError if not PD."""
    cx, cu, cxx, cuu, cxu = blocks
    T, nx = cx.shape
    nu = cu.shape[1]
    K = np.zeros((T, nu, nx))
    k = np.zeros((T, nu))
    Vx = np.zeros(nx)
    Vxx = np.zeros((nx, nx))
    expected = 0.0
    eye = np.eye(nu)
    for t in range(T - 1, -1, -1):
        Qx = cx[t] + A[t].T @ Vx
        Qu = cu[t] + B[t].T @ Vx
        Qxx = cxx[t] + A[t].T @ Vxx @ A[t]
        Quu = cuu[t] + B[t].T @ Vxx @ B[t]
        Qux = cxu[t].T + B[t].T @ Vxx @ A[t]
        Quu_reg = 0.5 * (Quu + Quu.T) + mu * eye
        chol = np.linalg.cholesky(Quu_reg)  # raises if not PD -> retry
        rhs = np.column_stack([Qu, Qux])
        sol = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        k_raw = -sol[:, 0]
        K_t = -sol[:, 1:]
        expected += float(-0.5 * k_raw @ Qu)

        # Action limits: keep the stepped nominal feasible and stop
        # feedback from pushing a saturated coordinate further out.
        stepped = np.clip(rollout.controls[t] + k_raw, lower, upper)
        k[t] = stepped - rollout.controls[t]
        saturated = stepped != rollout.controls[t] + k_raw
        K_t = np.where(saturated[:, None], 0.0, K_t)
        K[t] = K_t

        Vx = Qx + K_t.T @ (Quu @ k[t] + Qu) + Qux.T @ k[t]
        Vxx = Qxx + K_t.T @ Quu @ K_t + K_t.T @ Qux + Qux.T @ K_t
        Vxx = 0.5 * (Vxx + Vxx.T)
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(k))):
        raise NumericalDivergence("non-finite gains from backward pass")
    policy = FeedbackPolicy(
        times=rollout.times,
        x_nom=rollout.states,
        u_nom=rollout.controls,
        K=K,
        k=k,
    )
    return policy, max(expected, 0.0)


def backward_pass(
    rollout: Rollout,
    jacobians,
    blocks,
    config: ILQGConfig,
    mu: float,
    lower: np.ndarray,
    upper: np.ndarray,
):
    """Backward sweep with mu escalation; returns (policy, expected, mu)."""
    A, B, _, _ = jacobians
    while True:
        try:
            policy, expected = _backward_once(
                rollout, A, B, blocks, mu, lower, upper
            )
            return policy, expected, mu
        except np.linalg.LinAlgError:
            mu *= 10.0
            if mu > config.mu_max:
                raise RegularizationLimit(
                    f"Quu not positive definite below mu_max={config.mu_max}"
                ) from None


def _rollout_feedback_batch(
    policy: FeedbackPolicy,
    alphas: np.ndarray,
    state: SimState,
    model: Model,
    cost: CostSpec,
) -> BatchRollouts:
    """Roll the policy once per step size, all step sizes advanced together."""
    from ..costs import base_cost_batch, risk_transform

    spec = model.spec
    T = policy.horizon
    nA = alphas.shape[0]
    states = np.empty((nA, T, spec.nx))
    controls = np.empty((nA, T, spec.nu))
    residuals = np.empty((nA, T, spec.nr))
    qpos = np.broadcast_to(state.qpos, (nA, spec.nq)).copy()
    qvel = np.broadcast_to(state.qvel, (nA, spec.nv)).copy()
    with np.errstate(all="ignore"):
        for t in range(T):
            x = np.concatenate([qpos, qvel], axis=-1)
            u = (
                policy.u_nom[t]
                + (x - policy.x_nom[t]) @ policy.K[t].T
                + alphas[:, None] * policy.k[t]
            )
            u = np.clip(u, spec.control_lower, spec.control_upper)
            states[:, t] = x
            controls[:, t] = u
            residuals[:, t] = model.residual(qpos, qvel, u)
            qpos, qvel = model.step_arrays(qpos, qvel, u)
        costs = risk_transform(base_cost_batch(cost, residuals), cost.risk)
        objectives = np.sum(costs, axis=-1)
    objectives = np.where(np.isfinite(objectives), objectives, np.inf)
    return BatchRollouts(
        times=policy.times,
        states=states,
        controls=controls,
        residuals=residuals,
        costs=costs,
        objectives=objectives,
    )


def rollout_feedback(
    policy: FeedbackPolicy,
    alpha: float,
    state: SimState,
    model: Model,
    cost: CostSpec,
) -> tuple[float, Rollout]:
    """Forward simulation of the affine policy at one step size."""
    batch = _rollout_feedback_batch(policy, np.array([alpha]), state, model, cost)
    return float(batch.objectives[0]), batch.single(0)


@dataclass
class ILQGIteration:
    """One full improve cycle: new controls plus diagnostics."""

    controls: np.ndarray
    rollout: Rollout
    objective: float
    nominal_objective: float
    candidate_objectives: np.ndarray
    expected_improvement: float
    mu: float
    policy: FeedbackPolicy | None
    aborted: bool = False


def plan_iteration(
    controls: np.ndarray,
    state: SimState,
    model: Model,
    cost: CostSpec,
    config: ILQGConfig,
    mu: float | None = None,
) -> ILQGIteration:
    """Nominal rollout, backward pass, line search, pick the best.

    On any numerical failure the nominal controls are kept and mu is
    raised, so a live agent never loses its plan to one bad iteration.
    """
    spec = model.spec
    if mu is None:
        mu = config.mu_init
    base = rollout_controls(model, state, controls, cost)

    def abort() -> ILQGIteration:
        return ILQGIteration(
            controls=base.controls,
            rollout=base,
            objective=base.total_cost,
            nominal_objective=base.total_cost,
            candidate_objectives=np.array([base.total_cost]),
            expected_improvement=0.0,
            mu=min(mu * 10.0, config.mu_max),
            policy=None,
            aborted=True,
        )

    if base.diverged:
        return abort()
    try:
        jac = linearize_trajectory(
            model, base.states[:, : spec.nq], base.states[:, spec.nq :], base.controls
        )
        blocks = _cost_blocks(cost, base, jac[2], jac[3])
        policy, expected, mu_used = backward_pass(
            base, jac, blocks, config, mu, spec.control_lower, spec.control_upper
        )
    except (NumericalDivergence, RegularizationLimit):
        return abort()

    alphas = np.concatenate([[0.0], config.alphas()])  # index 0 replays nominal
    batch = _rollout_feedback_batch(policy, alphas, state, model, cost)
    best = int(np.argmin(batch.objectives))
    improved = best > 0 and batch.objectives[best] < batch.objectives[0]
    if improved:
        mu_next = max(mu_used * 0.5, config.mu_min)
    else:
        mu_next = min(mu_used * 10.0, config.mu_max)
    return ILQGIteration(
        controls=batch.controls[best],
        rollout=batch.single(best),
        objective=float(batch.objectives[best]),
        nominal_objective=float(batch.objectives[0]),
        candidate_objectives=batch.objectives,
        expected_improvement=expected,
        mu=mu_next,
        policy=policy,
    )


class ILQGPlanner:
    """Stateful wrapper threading mu between iterations.

    Plans are carried as zero-order-hold splines over the step grid, so
    the rest of the system can treat every planner's plan uniformly;
    re-evaluating that spline on the next call's (shifted) grid is what
    warm-starts the sequence.
    """

    kind = "ilqg"

    def __init__(self, config: ILQGConfig):
        self.config = config
        self.mu = config.mu_init
        self.last_expected_improvement = 0.0

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def improve(
        self, plan: SplinePlan, state: SimState, model: Model, cost: CostSpec
    ) -> PlanResult:
        h = model.spec.timestep
        horizon = self.config.horizon
        if (
            plan.kind is Interpolation.ZERO
            and plan.num_knots == horizon
            and plan.times.size >= 2
            and np.allclose(np.diff(plan.times), h, rtol=1e-9, atol=1e-12)
            and plan.times[0] <= state.time < plan.times[0] + h
        ):
            # warm start already lives on a step lattice covering now; keep
            # its anchor so knot values stay pinned to absolute times across
            # replans instead of being re-quantized every call
            times = plan.times
            controls = plan.values
        else:
            times = step_time_grid(state.time, h, horizon)
            if plan.num_knots == times.shape[0] and np.allclose(plan.times, times):
                controls = plan.values
            else:
                controls = evaluate_many(plan, times)
        it = plan_iteration(controls, state, model, cost, self.config, self.mu)
        self.mu = it.mu
        self.last_expected_improvement = it.expected_improvement
        new_plan = SplinePlan(times, it.controls, Interpolation.ZERO)
        return PlanResult(
            plan=new_plan,
            rollout=it.rollout,
            objective=it.objective,
            nominal_objective=it.nominal_objective,
            candidate_objectives=it.candidate_objectives,
        )
