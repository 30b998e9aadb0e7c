"""Dynamics model tests: physics oracles, Jacobians, batching, divergence."""

import numpy as np
import pytest

from mpcdesk.models import (
    MODEL_NAMES,
    AcrobotModel,
    CartPoleModel,
    LinearModel,
    NumericalDivergence,
    ParticleModel,
    PendulumModel,
    SimState,
    fd_jacobians,
    get_model,
    linearize_trajectory,
    step,
)


def rk4(model, qpos, qvel, u, dt, steps):
    """Independent reference integrator over the model's acceleration."""
    q, v = qpos.astype(float).copy(), qvel.astype(float).copy()
    for _ in range(steps):

        def f(state):
            qq, vv = state
            return vv, model.acceleration(qq, vv, u)

        k1 = f((q, v))
        k2 = f((q + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1]))
        k3 = f((q + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1]))
        k4 = f((q + dt * k3[0], v + dt * k3[1]))
        q = q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return q, v


def pendulum_energy(m: PendulumModel, qpos, qvel):
    return (
        0.5 * m.mass * m.length**2 * qvel[0] ** 2
        - m.mass * m.gravity * m.length * np.cos(qpos[0])
    )


def cartpole_energy(m: CartPoleModel, qpos, qvel):
    x_dot, omega = qvel
    theta = qpos[1]
    kinetic = (
        0.5 * (m.cart_mass + m.pole_mass) * x_dot**2
        + m.pole_mass * m.length * x_dot * omega * np.cos(theta)
        + 0.5 * m.pole_mass * m.length**2 * omega**2
    )
    potential = -m.pole_mass * m.gravity * m.length * np.cos(theta)
    return kinetic + potential


def acrobot_energy(m: AcrobotModel, qpos, qvel):
    q1, q2 = qpos
    w = qvel
    c2 = np.cos(q2)
    d1 = m.m1 * m.lc1**2 + m.m2 * (m.l1**2 + m.lc2**2 + 2 * m.l1 * m.lc2 * c2) + m.I1 + m.I2
    d2 = m.m2 * (m.lc2**2 + m.l1 * m.lc2 * c2) + m.I2
    mass = np.array([[d1, d2], [d2, m.m2 * m.lc2**2 + m.I2]])
    kinetic = 0.5 * w @ mass @ w
    potential = -(m.m1 * m.lc1 + m.m2 * m.l1) * m.gravity * np.cos(q1) - (
        m.m2 * m.lc2 * m.gravity
    ) * np.cos(q1 + q2)
    return kinetic + potential


@pytest.mark.parametrize(
    "model,energy,q0,v0",
    [
        (PendulumModel(damping=0.0), pendulum_energy, [2.0], [0.5]),
        (CartPoleModel(), cartpole_energy, [0.3, 2.2], [0.1, -0.4]),
        (AcrobotModel(), acrobot_energy, [0.7, -0.4], [0.2, 0.3]),
    ],
)
def test_unforced_dynamics_conserve_energy(model, energy, q0, v0):
    # a sign or factor error anywhere in the equations of motion would
    # show up as secular energy drift under an accurate integrator
    q0, v0 = np.array(q0), np.array(v0)
    e0 = energy(model, q0, v0)
    q, v = rk4(model, q0, v0, np.zeros(1), dt=1e-3, steps=2000)
    e1 = energy(model, q, v)
    assert abs(e1 - e0) < 1e-6 * max(1.0, abs(e0))


def test_pendulum_damping_dissipates():
    model = PendulumModel(damping=0.2)
    q, v = rk4(model, np.array([2.0]), np.array([0.5]), np.zeros(1), 1e-3, 2000)
    assert pendulum_energy(model, q, v) < pendulum_energy(
        model, np.array([2.0]), np.array([0.5])
    )


def test_semi_implicit_step_order():
    # one step differs from the reference by O(h^2); halving h should
    # shrink the error by roughly 4x
    q0, v0 = np.array([1.2]), np.array([-0.3])
    u = np.array([0.7])
    m1 = PendulumModel(damping=0.0, timestep=1e-2)
    m2 = PendulumModel(damping=0.0, timestep=5e-3)
    e1 = np.abs(
        np.concatenate(m1.step_arrays(q0, v0, u))
        - np.concatenate(rk4(m1, q0, v0, u, 1e-2, 1))
    ).max()
    e2 = np.abs(
        np.concatenate(m2.step_arrays(q0, v0, u))
        - np.concatenate(rk4(m2, q0, v0, u, 5e-3, 1))
    ).max()
    assert e1 / e2 > 3.0


def test_semi_implicit_update_order():
    # velocity integrates first; the position update uses the new velocity
    model = ParticleModel(timestep=0.01)
    q, v = model.step_arrays(np.zeros(2), np.zeros(2), np.array([1.0, -1.0]))
    np.testing.assert_allclose(q, 0.01 * v, atol=1e-15)


def test_particle_jacobians_analytic():
    model = ParticleModel(timestep=0.01)
    h = 0.01
    state = SimState(qpos=np.array([0.3, -0.2]), qvel=np.array([1.0, 0.5]), time=0.0)
    jac = fd_jacobians(model, state, np.array([0.2, -0.4]))
    eye = np.eye(2)
    A = np.block([[eye, h * eye], [np.zeros((2, 2)), eye]])
    B = np.vstack([h * h * eye, h * eye])
    C = np.vstack([np.hstack([eye, np.zeros((2, 2))]),
                   np.hstack([np.zeros((2, 2)), eye]),
                   np.zeros((2, 4))])
    D = np.vstack([np.zeros((4, 2)), eye])
    np.testing.assert_allclose(jac.A, A, atol=1e-8)
    np.testing.assert_allclose(jac.B, B, atol=1e-8)
    np.testing.assert_allclose(jac.C, C, atol=1e-8)
    np.testing.assert_allclose(jac.D, D, atol=1e-8)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_linearize_trajectory_matches_pointwise(name):
    model = get_model(name)
    spec = model.spec
    rng = np.random.default_rng(1)
    T = 7
    qpos = rng.normal(0, 1, (T, spec.nq))
    qvel = rng.normal(0, 1, (T, spec.nv))
    ctrl = rng.normal(0, 1, (T, spec.nu))
    A, B, C, D = linearize_trajectory(model, qpos, qvel, ctrl)
    for t in range(T):
        jac = fd_jacobians(model, SimState(qpos[t], qvel[t], 0.0), ctrl[t])
        np.testing.assert_allclose(A[t], jac.A, atol=1e-10)
        np.testing.assert_allclose(B[t], jac.B, atol=1e-10)
        np.testing.assert_allclose(C[t], jac.C, atol=1e-10)
        np.testing.assert_allclose(D[t], jac.D, atol=1e-10)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_batched_step_matches_single(name):
    model = get_model(name)
    spec = model.spec
    rng = np.random.default_rng(2)
    B = 12
    qpos = rng.normal(0, 1, (B, spec.nq))
    qvel = rng.normal(0, 1, (B, spec.nv))
    ctrl = rng.normal(0, 1, (B, spec.nu))
    q_all, v_all = model.step_arrays(qpos, qvel, ctrl)
    r_all = model.residual(qpos, qvel, ctrl)
    for i in range(B):
        q1, v1 = model.step_arrays(qpos[i], qvel[i], ctrl[i])
        np.testing.assert_array_equal(q_all[i], q1)
        np.testing.assert_array_equal(v_all[i], v1)
        np.testing.assert_array_equal(r_all[i], model.residual(qpos[i], qvel[i], ctrl[i]))


def test_step_returns_residual_of_input_state():
    model = get_model("pendulum")
    state = SimState(qpos=np.array([0.5]), qvel=np.array([1.0]), time=0.0)
    u = np.array([0.3])
    nxt, resid = step(model, state, u)
    np.testing.assert_array_equal(resid, model.residual(state.qpos, state.qvel, u))
    assert nxt.time == pytest.approx(state.time + model.timestep)
    assert nxt.qpos[0] != state.qpos[0]


def test_step_determinism():
    model = get_model("cartpole")
    state = SimState(qpos=np.array([0.1, 0.2]), qvel=np.array([0.3, 0.4]), time=1.0)
    u = np.array([0.5])
    a1 = step(model, state, u)
    a2 = step(model, state, u)
    np.testing.assert_array_equal(a1[0].as_vector(), a2[0].as_vector())


def test_step_raises_on_divergence():
    model = get_model("pendulum")
    bad = SimState(qpos=np.array([np.nan]), qvel=np.zeros(1), time=0.0)
    with pytest.raises(NumericalDivergence):
        step(model, bad, np.zeros(1))


def test_pendulum_hanging_equilibrium():
    model = get_model("pendulum")
    state = model.initial_state()
    for _ in range(100):
        state, _ = step(model, state, np.zeros(1))
    assert abs(state.qpos[0]) < 1e-12 and abs(state.qvel[0]) < 1e-12


def test_pendulum_upright_residual_vanishes():
    model = get_model("pendulum")
    r = model.residual(np.array([np.pi]), np.zeros(1), np.zeros(1))
    assert abs(r[0]) < 1e-12 and abs(r[1]) < 1e-12  # 1+cos(pi), sin(pi)


def test_pendulum_torque_cannot_hold_horizontal():
    model = PendulumModel()
    assert model.max_torque < model.mass * model.gravity * model.length


def test_cartpole_force_moves_cart_and_pole():
    model = get_model("cartpole")
    state = SimState(qpos=np.zeros(2), qvel=np.zeros(2), time=0.0)
    nxt, _ = step(model, state, np.array([5.0]))
    assert nxt.qvel[0] > 0  # cart accelerates along the push
    for _ in range(20):
        nxt, _ = step(model, nxt, np.array([5.0]))
    assert nxt.qpos[1] != 0.0  # pole reacts


def test_acrobot_torque_only_at_elbow():
    model = AcrobotModel()
    acc = model.acceleration(np.zeros(2), np.zeros(2), np.array([1.0]))
    # hanging straight down, gravity cancels; both joints accelerate
    # through the coupled inertia, shoulder opposite to elbow
    assert acc[1] > 0 and acc[0] < 0


def test_linear_model_exact_step():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.0], [0.1]])
    model = LinearModel(A=A, B=B)
    x = np.array([1.0, -2.0])
    u = np.array([3.0])
    q, v = model.step_arrays(x, np.zeros(0), u)
    np.testing.assert_allclose(q, A @ x + B @ u.reshape(-1), atol=1e-15)
    assert v.shape == (0,)


def test_get_model_names_and_overrides():
    assert set(MODEL_NAMES) == {"particle", "pendulum", "cartpole", "acrobot"}
    m = get_model("pendulum", max_torque=3.5)
    assert m.max_torque == 3.5
    with pytest.raises(KeyError):
        get_model("hovercraft")
    coarse = m.with_timestep(0.05)
    assert coarse.timestep == 0.05 and coarse.max_torque == 3.5


def test_control_clamping_is_not_applied_by_step():
    # step applies the control as given; clamping is the caller's job
    model = PendulumModel(max_torque=1.0)
    state = SimState(qpos=np.zeros(1), qvel=np.zeros(1), time=0.0)
    hard, _ = step(model, state, np.array([50.0]))
    soft, _ = step(model, state, np.array([1.0]))
    assert hard.qvel[0] > soft.qvel[0]
