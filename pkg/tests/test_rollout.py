"""Rollout tests: replay oracle, batching, clamping, divergence scoring."""

import numpy as np

from mpcdesk.costs import CostSpec, CostTerm, Norm, NormKind, running_cost
from mpcdesk.models import LinearModel, SimState, get_model, step
from mpcdesk.rollout import (
    plan_controls,
    rollout_controls,
    rollout_controls_batch,
    rollout_plan,
    step_time_grid,
)
from mpcdesk.splines import Interpolation, SplinePlan


def pendulum_cost(risk=0.0):
    return CostSpec(
        terms=(
            CostTerm("upright", 5.0, NormKind(Norm.COSH, 2.0), 0, 2),
            CostTerm("velocity", 0.1, NormKind(Norm.QUADRATIC), 2, 3),
            CostTerm("effort", 0.05, NormKind(Norm.QUADRATIC), 3, 4),
        ),
        risk=risk,
    )


def test_step_time_grid():
    times = step_time_grid(2.0, 0.1, 4)
    np.testing.assert_allclose(times, [2.0, 2.1, 2.2, 2.3])


def test_rollout_matches_manual_replay():
    model = get_model("pendulum")
    cost = pendulum_cost()
    rng = np.random.default_rng(0)
    controls = rng.uniform(-2, 2, (25, 1))
    state = SimState(qpos=np.array([0.4]), qvel=np.array([-0.2]), time=1.5)
    ro = rollout_controls(model, state, controls, cost)

    # independent replay through the scalar step() path
    s = state.copy()
    total = 0.0
    for t in range(25):
        assert np.allclose(ro.states[t], s.as_vector())
        s2, resid = step(model, s, controls[t])
        np.testing.assert_allclose(ro.residuals[t], resid, atol=1e-12)
        total += running_cost(cost, resid)
        s = s2
    assert np.isclose(ro.total_cost, total)
    np.testing.assert_allclose(ro.times, 1.5 + 0.01 * np.arange(25))


def test_batch_rows_match_single_rollouts():
    model = get_model("cartpole")
    cost = CostSpec(
        terms=(
            CostTerm("up", 2.0, NormKind(Norm.COSH, 1.0), 0, 2),
            CostTerm("center", 0.3, NormKind(Norm.SMOOTH_ABS, 0.1), 2, 3),
            CostTerm("vel", 0.05, NormKind(Norm.QUADRATIC), 3, 5),
            CostTerm("effort", 0.01, NormKind(Norm.QUADRATIC), 5, 6),
        )
    )
    rng = np.random.default_rng(1)
    controls = rng.uniform(-10, 10, (6, 30, 1))
    state = SimState(qpos=np.array([0.1, 0.3]), qvel=np.zeros(2), time=0.0)
    batch = rollout_controls_batch(model, state, controls, cost)
    for i in range(6):
        solo = rollout_controls(model, state, controls[i], cost)
        np.testing.assert_allclose(batch.states[i], solo.states, atol=1e-12)
        assert np.isclose(batch.objectives[i], solo.total_cost)


def test_rollout_clamps_controls():
    model = get_model("pendulum", max_torque=1.0)
    cost = pendulum_cost()
    state = model.initial_state()
    controls = np.full((10, 1), 99.0)
    ro = rollout_controls(model, state, controls, cost)
    np.testing.assert_array_equal(ro.controls, np.ones((10, 1)))


def test_zero_cost_spec_gives_zero_objective():
    model = get_model("particle")
    spec = CostSpec(terms=(CostTerm("nothing", 0.0, NormKind(Norm.QUADRATIC), 0, 6),))
    ro = rollout_controls(model, model.initial_state(), np.ones((5, 2)), spec)
    assert ro.total_cost == 0.0


def test_divergent_candidate_scores_inf_not_raise():
    # an unstable linear system overflows quickly; the batch keeps going
    # and just marks the objective infinite
    model = LinearModel(A=np.array([[40.0]]), B=np.array([[1.0]]))
    spec = CostSpec(terms=(CostTerm("state", 1.0, NormKind(Norm.QUADRATIC), 0, 1),
                           CostTerm("input", 1.0, NormKind(Norm.QUADRATIC), 1, 2)))
    state = SimState(qpos=np.array([1.0]), qvel=np.zeros(0), time=0.0)
    controls = np.zeros((2, 400, 1))
    controls[1] = 0.001
    batch = rollout_controls_batch(model, state, controls, spec)
    assert np.all(np.isinf(batch.objectives))
    ro = batch.single(0)
    assert ro.diverged and ro.total_cost == float("inf")


def test_rollout_plan_queries_spline_at_step_times():
    model = get_model("pendulum")
    cost = pendulum_cost()
    state = SimState(qpos=np.array([0.2]), qvel=np.zeros(1), time=0.7)
    knots = np.linspace(0.7, 1.2, 6)
    plan = SplinePlan(knots, np.linspace(-1, 1, 6)[:, None], Interpolation.LINEAR)
    ro = rollout_plan(model, state, plan, cost, 20)
    times = step_time_grid(0.7, model.spec.timestep, 20)
    np.testing.assert_allclose(ro.controls, plan_controls(plan, times), atol=1e-12)
    # replay with the explicit control sequence gives the identical J
    again = rollout_controls(model, state, plan_controls(plan, times), cost)
    assert np.isclose(again.total_cost, ro.total_cost)


def test_risk_changes_objective_ordering_monotonically():
    model = get_model("pendulum")
    state = SimState(qpos=np.array([1.0]), qvel=np.zeros(1), time=0.0)
    controls = np.zeros((15, 1))
    j_neutral = rollout_controls(model, state, controls, pendulum_cost(0.0)).total_cost
    j_averse = rollout_controls(model, state, controls, pendulum_cost(0.2)).total_cost
    j_seeking = rollout_controls(model, state, controls, pendulum_cost(-0.2)).total_cost
    assert j_seeking < j_neutral < j_averse
