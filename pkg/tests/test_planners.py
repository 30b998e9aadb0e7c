"""Planner tests: candidate generation, adjoint gradients, Riccati oracle."""

import numpy as np
import pytest

from mpcdesk.costs import CostSpec, CostTerm, Norm, NormKind
from mpcdesk.models import LinearModel, SimState, get_model, linearize_trajectory
from mpcdesk.planners import make_planner
from mpcdesk.planners.gradient import (
    GradientConfig,
    chain_to_params,
    costate_sweep,
)
from mpcdesk.planners.gradient import improve as gradient_improve
from mpcdesk.planners.ilqg import (
    ILQGConfig,
    backward_pass,
    plan_iteration,
    rollout_feedback,
)
from mpcdesk.planners.ilqg import _cost_blocks
from mpcdesk.planners.sampling import (
    SamplingConfig,
    evaluate_candidate,
    sample_candidates,
)
from mpcdesk.planners.sampling import improve as sampling_improve
from mpcdesk.rollout import rollout_controls, rollout_plan, step_time_grid
from mpcdesk.splines import Interpolation, SplinePlan, evaluate


def pendulum_setup(horizon=20):
    model = get_model("pendulum").with_timestep(0.05)
    cost = CostSpec(
        terms=(
            CostTerm("upright", 5.0, NormKind(Norm.COSH, 2.0), 0, 2),
            CostTerm("velocity", 0.1, NormKind(Norm.QUADRATIC), 2, 3),
            CostTerm("effort", 0.05, NormKind(Norm.QUADRATIC), 3, 4),
        )
    )
    state = SimState(qpos=np.array([0.4]), qvel=np.array([0.1]), time=0.0)
    knots = np.linspace(0.0, horizon * 0.05, 6)
    plan = SplinePlan(knots, np.zeros((6, 1)), Interpolation.LINEAR)
    return model, cost, state, plan


def lqr_instance(rng, n=2, m=1):
    """Random discrete LQR: stable A, PD weights; returns model and cost."""
    A = rng.normal(0, 1, (n, n))
    A *= 0.9 / max(1e-9, np.abs(np.linalg.eigvals(A)).max())
    B = rng.normal(0, 1, (n, m))
    Mx = rng.normal(0, 1, (n, n))
    Wx = Mx @ Mx.T + 0.1 * np.eye(n)
    Mu = rng.normal(0, 1, (m, m))
    Wu = Mu @ Mu.T + 0.1 * np.eye(m)
    model = LinearModel(A=A, B=B)
    cost = CostSpec(
        terms=(
            CostTerm("state", 1.0, NormKind(Norm.QUADRATIC, weight_matrix=Wx), 0, n),
            CostTerm("input", 1.0, NormKind(Norm.QUADRATIC, weight_matrix=Wu), n, n + m),
        )
    )
    return model, cost, A, B, Wx, Wu


def riccati_reference(A, B, Q, R, T):
    """Textbook finite-horizon recursion, V_T = 0, cost sum x'Qx + u'Ru."""
    n = A.shape[0]
    P = np.zeros((n, n))
    gains = []
    for _ in range(T):
        K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P = Q + K.T @ R @ K + (A + B @ K).T @ P @ (A + B @ K)
        gains.append(K)
    gains.reverse()
    return gains, P


def riccati_controls(A, B, gains, x0):
    x = x0.copy()
    us = []
    for K in gains:
        u = K @ x
        us.append(u)
        x = A @ x + B @ u
    return np.array(us)


# ------------------------------------------------------------- sampling

def test_sample_candidates_contract():
    _, _, _, plan = pendulum_setup()
    lo, hi = np.array([-2.0]), np.array([2.0])
    cfg = SamplingConfig(candidates=6, noise=0.2, horizon=20, seed=1)
    rng = np.random.default_rng(1)
    cands = sample_candidates(plan, cfg, rng, lo, hi)
    assert len(cands) == 6
    assert cands[0] is plan
    for c in cands[1:]:
        assert np.all(c.values >= lo) and np.all(c.values <= hi)
        assert not np.array_equal(c.values, plan.values)
    # same seed, same draw
    again = sample_candidates(plan, cfg, np.random.default_rng(1), lo, hi)
    for a, b in zip(cands[1:], again[1:]):
        np.testing.assert_array_equal(a.values, b.values)


def test_sample_candidates_zero_noise_and_single():
    _, _, _, plan = pendulum_setup()
    lo, hi = np.array([-2.0]), np.array([2.0])
    cfg = SamplingConfig(candidates=4, noise=0.0, horizon=20)
    for c in sample_candidates(plan, cfg, np.random.default_rng(0), lo, hi):
        np.testing.assert_array_equal(c.values, plan.values)
    only = sample_candidates(
        SplinePlan(plan.times, plan.values, plan.kind),
        SamplingConfig(candidates=1, noise=0.5, horizon=20),
        np.random.default_rng(0),
        lo,
        hi,
    )
    assert len(only) == 1


def test_evaluate_candidate_equals_replay():
    model, cost, state, plan = pendulum_setup()
    J, ro = evaluate_candidate(plan, state, model, cost, 20)
    times = step_time_grid(state.time, model.spec.timestep, 20)
    replay = rollout_controls(
        model, state, np.stack([evaluate(plan, t) for t in times]), cost
    )
    assert np.isclose(J, replay.total_cost)
    assert ro.horizon == 20


def test_sampling_improve_monotone_and_deterministic():
    model, cost, state, plan = pendulum_setup()
    cfg = SamplingConfig(candidates=8, noise=0.15, horizon=20, seed=3)

    def run():
        rng = np.random.default_rng(cfg.seed)
        cur = plan
        js = []
        for _ in range(15):
            cur = sampling_improve(cur, state, model, cost, cfg, rng)
            js.append(rollout_plan(model, state, cur, cost, 20).total_cost)
        return cur, js

    cur1, js1 = run()
    cur2, js2 = run()
    np.testing.assert_array_equal(cur1.values, cur2.values)
    assert js1 == js2
    assert all(b <= a + 1e-12 for a, b in zip(js1, js1[1:]))


def test_sampling_keeps_nominal_when_all_candidates_diverge():
    # explosive system: the zero plan stays finite, every perturbed
    # candidate overflows to +inf
    model = LinearModel(A=np.array([[50.0]]), B=np.array([[1.0]]), control_limit=5.0)
    cost = CostSpec(
        terms=(
            CostTerm("state", 1.0, NormKind(Norm.QUADRATIC), 0, 1),
            CostTerm("input", 1.0, NormKind(Norm.QUADRATIC), 1, 2),
        )
    )
    state = SimState(qpos=np.zeros(1), qvel=np.zeros(0), time=0.0)
    plan = SplinePlan(np.arange(5.0), np.zeros((5, 1)), Interpolation.ZERO)
    cfg = SamplingConfig(candidates=6, noise=0.3, horizon=200, seed=0)
    out = sampling_improve(plan, state, model, cost, cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(out.values, plan.values)


def test_sampling_scalar_task_approaches_grid_optimum():
    # one knot, one step: J(u) is a smooth scalar function; random search
    # should land within a couple of noise scales of the dense optimum
    model = LinearModel(A=np.array([[1.0]]), B=np.array([[1.0]]), control_limit=4.0)
    cost = CostSpec(
        terms=(
            CostTerm("state", 1.0, NormKind(Norm.QUADRATIC), 0, 1),
            CostTerm("input", 0.5, NormKind(Norm.QUADRATIC), 1, 2),
        )
    )
    state = SimState(qpos=np.array([2.0]), qvel=np.zeros(0), time=0.0)
    plan = SplinePlan(np.array([0.0]), np.zeros((1, 1)), Interpolation.ZERO)
    cfg = SamplingConfig(candidates=8, noise=0.02, horizon=1, seed=7)
    rng = np.random.default_rng(7)
    for _ in range(150):
        plan = sampling_improve(plan, state, model, cost, cfg, rng)
    grid = np.linspace(-4, 4, 20001)
    js = [
        rollout_controls(model, state, np.array([[u]]), cost).total_cost for u in grid
    ]
    u_star = grid[int(np.argmin(js))]
    sigma = 0.02 * 8.0  # noise fraction times control range
    assert abs(plan.values[0, 0] - u_star) < 2 * sigma


# ------------------------------------------------------------- gradient

def test_costate_zero_cost_gives_zero_gradient():
    model, _, state, plan = pendulum_setup()
    zero_cost = CostSpec(
        terms=(CostTerm("off", 0.0, NormKind(Norm.QUADRATIC), 0, 4),)
    )
    ro = rollout_plan(model, state, plan, zero_cost, 20)
    jac = linearize_trajectory(
        model, ro.states[:, :1], ro.states[:, 1:], ro.controls
    )
    sweep = costate_sweep(ro, jac, zero_cost)
    np.testing.assert_array_equal(sweep.lam, 0.0)
    np.testing.assert_array_equal(sweep.dJdu, 0.0)
    np.testing.assert_array_equal(chain_to_params(sweep.dJdu, plan, ro.times), 0.0)


def test_costate_two_step_hand_expansion():
    # scalar system x' = a x + b u, cost wx x^2 + wu u^2 over two steps:
    # dJ/du0 = 2 wu u0 + 2 wx x1 b, dJ/du1 = 2 wu u1
    a, b, wx, wu = 0.8, 0.5, 1.3, 0.7
    model = LinearModel(A=np.array([[a]]), B=np.array([[b]]))
    cost = CostSpec(
        terms=(
            CostTerm("state", wx, NormKind(Norm.QUADRATIC), 0, 1),
            CostTerm("input", wu, NormKind(Norm.QUADRATIC), 1, 2),
        )
    )
    x0, u0, u1 = 1.5, 0.3, -0.9
    state = SimState(qpos=np.array([x0]), qvel=np.zeros(0), time=0.0)
    controls = np.array([[u0], [u1]])
    ro = rollout_controls(model, state, controls, cost)
    jac = linearize_trajectory(model, ro.states, np.zeros((2, 0)), ro.controls)
    sweep = costate_sweep(ro, jac, cost)
    x1 = a * x0 + b * u0
    assert sweep.dJdu[0, 0] == pytest.approx(2 * wu * u0 + 2 * wx * x1 * b, rel=1e-9)
    assert sweep.dJdu[1, 0] == pytest.approx(2 * wu * u1, rel=1e-9)


def test_costate_gradient_matches_fd():
    model, cost, state, _ = pendulum_setup()
    rng = np.random.default_rng(2)
    T = 12
    controls = rng.uniform(-1.5, 1.5, (T, 1))
    ro = rollout_controls(model, state, controls, cost)
    jac = linearize_trajectory(model, ro.states[:, :1], ro.states[:, 1:], ro.controls)
    sweep = costate_sweep(ro, jac, cost)
    eps = 1e-6
    for t in range(T):
        up, dn = controls.copy(), controls.copy()
        up[t, 0] += eps
        dn[t, 0] -= eps
        fd = (
            rollout_controls(model, state, up, cost).total_cost
            - rollout_controls(model, state, dn, cost).total_cost
        ) / (2 * eps)
        assert abs(sweep.dJdu[t, 0] - fd) < 1e-3 * max(1.0, abs(fd))


def test_chain_to_params_matches_fd_on_knots():
    model, cost, state, plan = pendulum_setup()
    rng = np.random.default_rng(4)
    plan = SplinePlan(plan.times, rng.uniform(-1, 1, plan.values.shape), plan.kind)
    T = 20
    ro = rollout_plan(model, state, plan, cost, T)
    jac = linearize_trajectory(model, ro.states[:, :1], ro.states[:, 1:], ro.controls)
    grad = chain_to_params(costate_sweep(ro, jac, cost).dJdu, plan, ro.times)
    eps = 1e-6
    for p in range(plan.num_knots):
        up = plan.values.copy()
        up[p, 0] += eps
        dn = plan.values.copy()
        dn[p, 0] -= eps
        fd = (
            rollout_plan(model, state, SplinePlan(plan.times, up, plan.kind), cost, T).total_cost
            - rollout_plan(model, state, SplinePlan(plan.times, dn, plan.kind), cost, T).total_cost
        ) / (2 * eps)
        assert abs(grad[p, 0] - fd) < 1e-3 * max(1.0, abs(fd))


def test_gradient_improve_monotone_and_descends():
    model, cost, state, plan = pendulum_setup()
    cfg = GradientConfig(horizon=20)
    js = []
    cur = plan
    for _ in range(25):
        cur = gradient_improve(cur, state, model, cost, cfg)
        js.append(rollout_plan(model, state, cur, cost, 20).total_cost)
    assert all(b <= a + 1e-12 for a, b in zip(js, js[1:]))
    assert js[-1] < rollout_plan(model, state, plan, cost, 20).total_cost


def test_gradient_improve_zero_gradient_returns_nominal():
    # zero-weight cost: gradient vanishes, plan must come back unchanged
    model, _, state, plan = pendulum_setup()
    zero_cost = CostSpec(terms=(CostTerm("off", 0.0, NormKind(Norm.QUADRATIC), 0, 4),))
    out = gradient_improve(plan, state, model, zero_cost, GradientConfig(horizon=20))
    assert out is plan


def test_gradient_small_alpha_descends_when_gradient_large():
    model, cost, state, plan = pendulum_setup()
    cfg = GradientConfig(alpha_min=1e-4, alpha_max=1e-4, num_alphas=1, horizon=20)
    rng = np.random.default_rng(6)
    start = SplinePlan(plan.times, rng.uniform(-1, 1, plan.values.shape), plan.kind)
    j0 = rollout_plan(model, state, start, cost, 20).total_cost
    out = gradient_improve(start, state, model, cost, cfg)
    j1 = rollout_plan(model, state, out, cost, 20).total_cost
    assert j1 < j0


# ------------------------------------------------------------- ilqg

def test_backward_pass_gains_match_riccati():
    rng = np.random.default_rng(8)
    model, cost, A, B, Wx, Wu = lqr_instance(rng)
    T = 15
    state = SimState(qpos=rng.normal(0, 1, 2), qvel=np.zeros(0), time=0.0)
    nominal = rollout_controls(model, state, np.zeros((T, 1)), cost)
    jac = linearize_trajectory(model, nominal.states, np.zeros((T, 0)), nominal.controls)
    blocks = _cost_blocks(cost, nominal, jac[2], jac[3])
    cfg = ILQGConfig(horizon=T)
    lo = model.spec.control_lower
    hi = model.spec.control_upper
    policy, expected, _ = backward_pass(nominal, jac, blocks, cfg, 0.0, lo, hi)
    gains, _ = riccati_reference(A, B, Wx, Wu, T)
    for t in range(T):
        np.testing.assert_allclose(policy.K[t], gains[t], atol=1e-8)
    assert expected >= 0.0


def test_rollout_feedback_alpha_zero_reproduces_nominal():
    model, cost, state, _ = pendulum_setup()
    rng = np.random.default_rng(9)
    controls = rng.uniform(-1, 1, (20, 1))
    nominal = rollout_controls(model, state, controls, cost)
    jac = linearize_trajectory(model, nominal.states[:, :1], nominal.states[:, 1:], nominal.controls)
    blocks = _cost_blocks(cost, nominal, jac[2], jac[3])
    cfg = ILQGConfig(horizon=20)
    policy, _, _ = backward_pass(
        nominal, jac, blocks, cfg, 1.0,
        model.spec.control_lower, model.spec.control_upper,
    )
    J, ro = rollout_feedback(policy, 0.0, state, model, cost)
    np.testing.assert_array_equal(ro.controls, nominal.controls)
    assert J == pytest.approx(nominal.total_cost, rel=1e-12)


def test_rollout_feedback_alpha_one_hits_riccati_optimum_on_lqr():
    rng = np.random.default_rng(10)
    model, cost, A, B, Wx, Wu = lqr_instance(rng)
    T = 12
    x0 = rng.normal(0, 1, 2)
    state = SimState(qpos=x0, qvel=np.zeros(0), time=0.0)
    nominal = rollout_controls(model, state, np.zeros((T, 1)), cost)
    jac = linearize_trajectory(model, nominal.states, np.zeros((T, 0)), nominal.controls)
    blocks = _cost_blocks(cost, nominal, jac[2], jac[3])
    cfg = ILQGConfig(horizon=T)
    policy, _, _ = backward_pass(
        nominal, jac, blocks, cfg, 0.0,
        model.spec.control_lower, model.spec.control_upper,
    )
    J, _ = rollout_feedback(policy, 1.0, state, model, cost)
    gains, P = riccati_reference(A, B, Wx, Wu, T)
    assert J == pytest.approx(x0 @ P @ x0, abs=1e-8)


def test_feedback_handles_perturbed_start_better_than_replay():
    rng = np.random.default_rng(12)
    model, cost, A, B, Wx, Wu = lqr_instance(rng)
    T = 12
    x0 = rng.normal(0, 1, 2)
    state = SimState(qpos=x0, qvel=np.zeros(0), time=0.0)
    gains, P = riccati_reference(A, B, Wx, Wu, T)
    u_star = riccati_controls(A, B, gains, x0)
    nominal = rollout_controls(model, state, u_star, cost)
    jac = linearize_trajectory(model, nominal.states, np.zeros((T, 0)), nominal.controls)
    blocks = _cost_blocks(cost, nominal, jac[2], jac[3])
    policy, _, _ = backward_pass(
        nominal, jac, blocks, ILQGConfig(horizon=T), 0.0,
        model.spec.control_lower, model.spec.control_upper,
    )
    shoved = SimState(qpos=x0 + np.array([0.5, -0.3]), qvel=np.zeros(0), time=0.0)
    J_fb, _ = rollout_feedback(policy, 0.0, shoved, model, cost)
    J_open = rollout_controls(model, shoved, u_star, cost).total_cost
    assert J_fb < J_open


def test_plan_iteration_scalar_one_step():
    # T=1: only the effort term sees u, so the optimal step is u -> 0
    model = LinearModel(A=np.array([[1.0]]), B=np.array([[1.0]]))
    cost = CostSpec(
        terms=(
            CostTerm("state", 1.0, NormKind(Norm.QUADRATIC), 0, 1),
            CostTerm("input", 2.0, NormKind(Norm.QUADRATIC), 1, 2),
        )
    )
    state = SimState(qpos=np.array([3.0]), qvel=np.zeros(0), time=0.0)
    cfg = ILQGConfig(horizon=1, mu_init=1e-6)
    it = plan_iteration(np.array([[0.8]]), state, model, cost, cfg)
    assert abs(it.controls[0, 0]) < 1e-6
    assert it.expected_improvement >= 0.0


def test_plan_iteration_lqr_single_shot():
    rng = np.random.default_rng(14)
    model, cost, A, B, Wx, Wu = lqr_instance(rng)
    T = 12
    x0 = rng.normal(0, 1, 2)
    state = SimState(qpos=x0, qvel=np.zeros(0), time=0.0)
    cfg = ILQGConfig(horizon=T, mu_init=1e-6)
    it = plan_iteration(np.zeros((T, 1)), state, model, cost, cfg)
    _, P = riccati_reference(A, B, Wx, Wu, T)
    assert it.objective == pytest.approx(x0 @ P @ x0, abs=1e-6)
    assert it.mu == cfg.mu_min  # success halves mu, already at the floor


def test_plan_iteration_respects_bounds_and_monotone():
    model, cost, state, _ = pendulum_setup()
    cfg = ILQGConfig(horizon=20)
    u = np.zeros((20, 1))
    mu = cfg.mu_init
    prev = np.inf
    for _ in range(10):
        it = plan_iteration(u, state, model, cost, cfg, mu)
        assert it.objective <= it.nominal_objective + 1e-12
        assert it.objective <= prev + 1e-9
        assert np.all(np.abs(it.controls) <= 2.0 + 1e-12)
        u, mu, prev = it.controls, it.mu, it.objective


def test_constrained_pass_saturates_cleanly():
    # optimum far outside the box: controls pin to the limit and the
    # saturated steps carry no feedback
    model = LinearModel(A=np.array([[1.0]]), B=np.array([[1.0]]), control_limit=0.5)
    cost = CostSpec(
        terms=(
            CostTerm("state", 10.0, NormKind(Norm.QUADRATIC), 0, 1),
            CostTerm("input", 0.01, NormKind(Norm.QUADRATIC), 1, 2),
        )
    )
    state = SimState(qpos=np.array([5.0]), qvel=np.zeros(0), time=0.0)
    cfg = ILQGConfig(horizon=6, mu_init=1e-6)
    u = np.zeros((6, 1))
    mu = cfg.mu_init
    for _ in range(6):
        it = plan_iteration(u, state, model, cost, cfg, mu)
        u, mu = it.controls, it.mu
    assert np.all(np.abs(u) <= 0.5 + 1e-12)
    assert u[0, 0] == pytest.approx(-0.5, abs=1e-9)


# ------------------------------------------------------- planner classes

def test_make_planner_kinds_and_unknown():
    for kind in ("sampling", "gradient", "ilqg"):
        p = make_planner(kind, horizon=10)
        assert p.kind == kind and p.horizon == 10
    with pytest.raises(ValueError):
        make_planner("newton")


def test_planner_classes_improve_from_shared_plan():
    model, cost, state, plan = pendulum_setup()
    for kind in ("sampling", "gradient", "ilqg"):
        p = make_planner(kind, horizon=20)
        res = p.improve(plan, state, model, cost)
        assert res.objective <= res.nominal_objective + 1e-9
        assert res.rollout.horizon == 20
        assert np.isfinite(res.objective)


def test_ilqg_planner_accepts_spline_plans():
    # handing a linear spline to the direct-sequence planner exercises
    # the representation conversion used when switching planners live
    model, cost, state, plan = pendulum_setup()
    p = make_planner("ilqg", horizon=20)
    res = p.improve(plan, state, model, cost)
    assert res.plan.kind is Interpolation.ZERO
    assert res.plan.num_knots == 20
    res2 = p.improve(res.plan, state, model, cost)
    assert res2.objective <= res.objective + 1e-9
