"""Analytic dynamics models with a uniform step/residual interface.

Every model advances with a fixed-step semi-implicit Euler integrator
(velocities from accelerations first, then positions from the new
velocities) and reports a residual vector of task-relevant quantities
that are small when the task is solved. Finite-difference Jacobians of
both the step map and the residual are available for the derivative
planners; their cost scales with the input dimension, so extra residual
entries are effectively free.

Angle convention for the pendulum family: angles are measured from the
downward vertical, so hanging rest is 0 and upright is pi.

ODEs (q = positions, w = velocities, u = control):

* particle: planar unit-mass double integrator, qdd = u.
* pendulum: point mass m at distance l, damping b:
  wd = (u - b*w)/(m*l^2) - (g/l)*sin(q).
* cartpole: cart mass M, pole point mass m at distance l:
  xdd = (F + m*sin(q)*(l*w^2 + g*cos(q))) / (M + m*sin(q)^2),
  wd  = -(xdd*cos(q) + g*sin(q)) / l.
* acrobot: standard two-link underactuated arm (elbow torque only),
  textbook manipulator form with masses m1, m2, lengths l1, l2,
  centres lc1, lc2, inertias I1, I2.
* linear: x' = A x + B u in discrete time, for regulator test problems.

All dynamics functions broadcast over leading batch dimensions, which
is how the planners evaluate many candidate rollouts at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class NumericalDivergence(RuntimeError):
    """A state, control, or derivative went non-finite.

    Raised instead of propagating NaN/Inf so the planners detect
    divergence at the point of origin rather than amplifying it.
    """


@dataclass
class SimState:
    """Positions, velocities, and simulation time of the controlled system."""

    qpos: np.ndarray
    qvel: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.qpos = np.atleast_1d(np.asarray(self.qpos, dtype=float))
        self.qvel = np.asarray(self.qvel, dtype=float).reshape(-1)

    def as_vector(self) -> np.ndarray:
        """Concatenated [qpos, qvel], length nq+nv."""
        return np.concatenate([self.qpos, self.qvel])

    def copy(self) -> "SimState":
        return SimState(self.qpos.copy(), self.qvel.copy(), self.time)


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions, timestep, and control bounds of a model."""

    name: str
    nq: int
    nv: int
    nu: int
    nr: int
    timestep: float
    control_lower: np.ndarray
    control_upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "control_lower", np.asarray(self.control_lower, dtype=float)
        )
        object.__setattr__(
            self, "control_upper", np.asarray(self.control_upper, dtype=float)
        )
        if self.timestep <= 0:
            raise ValueError("timestep must be positive")
        if self.nr < 1:
            raise ValueError("models must report at least one residual entry")
        if not np.all(self.control_lower <= self.control_upper):
            raise ValueError("control_lower must not exceed control_upper")

    @property
    def nx(self) -> int:
        return self.nq + self.nv

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nq": self.nq,
            "nv": self.nv,
            "nu": self.nu,
            "nr": self.nr,
            "timestep": self.timestep,
            "control_lower": self.control_lower.tolist(),
            "control_upper": self.control_upper.tolist(),
        }


@dataclass
class Jacobians:
    """Linearization blocks: A = dx'/dx, B = dx'/du, C = dr/dx, D = dr/du."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


@dataclass(frozen=True)
class Model:
    """Base: subclasses provide acceleration() and residual(); stepping is shared."""

    @property
    def spec(self) -> ModelSpec:
        raise NotImplementedError

    def acceleration(self, qpos, qvel, ctrl) -> np.ndarray:
        raise NotImplementedError

    def residual(self, qpos, qvel, ctrl) -> np.ndarray:
        """Residual vector at the given state and control, broadcasting over batches."""
        raise NotImplementedError

    def step_arrays(self, qpos, qvel, ctrl):
        """Semi-implicit Euler: velocities first, positions from new velocities."""
        h = self.spec.timestep
        qvel_next = qvel + h * self.acceleration(qpos, qvel, ctrl)
        qpos_next = qpos + h * qvel_next
        return qpos_next, qvel_next

    def with_timestep(self, timestep: float) -> "Model":
        return replace(self, timestep=timestep)

    def initial_state(self) -> SimState:
        spec = self.spec
        return SimState(np.zeros(spec.nq), np.zeros(spec.nv), 0.0)


def step(model: Model, state: SimState, control: np.ndarray):
    """Advance one timestep; returns (next_state, residual at the input state).

    Deterministic: identical inputs give bit-identical outputs. The control
    is applied as given (callers clamp to bounds); non-finite inputs raise
    NumericalDivergence since they signal upstream blow-up.
    """
    control = np.asarray(control, dtype=float).reshape(-1)
    spec = model.spec
    if control.shape != (spec.nu,):
        raise ValueError(f"expected control of length {spec.nu}, got {control.shape}")
    if not (
        np.all(np.isfinite(state.qpos))
        and np.all(np.isfinite(state.qvel))
        and np.all(np.isfinite(control))
    ):
        raise NumericalDivergence(
            f"non-finite input to {spec.name}.step at t={state.time:.4f}"
        )
    resid = model.residual(state.qpos, state.qvel, control)
    qpos_next, qvel_next = model.step_arrays(state.qpos, state.qvel, control)
    return SimState(qpos_next, qvel_next, state.time + spec.timestep), resid


def _pack_outputs(model: Model, qpos, qvel, ctrl):
    qpos_next, qvel_next = model.step_arrays(qpos, qvel, ctrl)
    x_next = np.concatenate([qpos_next, qvel_next], axis=-1)
    return x_next, model.residual(qpos, qvel, ctrl)


def fd_jacobians(
    model: Model, state: SimState, control: np.ndarray, eps: float = 1e-6
) -> Jacobians:
    """Centered-difference Jacobians of the step map and residual.

    Differences column by column over the nx+nu input entries; each column
    costs two evaluations regardless of how many residual outputs exist.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    spec = model.spec
    control = np.asarray(control, dtype=float).reshape(-1)
    x = state.as_vector()
    n_in = spec.nx + spec.nu
    # One batched evaluation over all +/- perturbations.
    xs = np.tile(x, (2 * n_in, 1))
    us = np.tile(control, (2 * n_in, 1))
    for d in range(spec.nx):
        xs[2 * d, d] += eps
        xs[2 * d + 1, d] -= eps
    for d in range(spec.nu):
        row = 2 * (spec.nx + d)
        us[row, d] += eps
        us[row + 1, d] -= eps
    x_next, resid = _pack_outputs(model, xs[:, : spec.nq], xs[:, spec.nq :], us)
    dx = (x_next[0::2] - x_next[1::2]) / (2 * eps)
    dr = (resid[0::2] - resid[1::2]) / (2 * eps)
    jac = Jacobians(
        A=dx[: spec.nx].T.copy(),
        B=dx[spec.nx :].T.copy(),
        C=dr[: spec.nx].T.copy(),
        D=dr[spec.nx :].T.copy(),
    )
    for block in (jac.A, jac.B, jac.C, jac.D):
        if not np.all(np.isfinite(block)):
            raise NumericalDivergence(
                f"non-finite finite-difference Jacobian for {spec.name}"
            )
    return jac


def linearize_trajectory(model: Model, qpos, qvel, ctrl, eps: float = 1e-6):
    """Jacobians at every point of a trajectory in one vectorized pass.

    qpos: (T, nq), qvel: (T, nv), ctrl: (T, nu). Returns stacked arrays
    A: (T, nx, nx), B: (T, nx, nu), C: (T, nr, nx), D: (T, nr, nu).
    """
    spec = model.spec
    T = qpos.shape[0]
    x = np.concatenate([qpos, qvel], axis=-1)
    n_in = spec.nx + spec.nu
    # Layout: (T, 2*n_in, dim) then flattened into one big batch.
    xs = np.broadcast_to(x[:, None, :], (T, 2 * n_in, spec.nx)).copy()
    us = np.broadcast_to(ctrl[:, None, :], (T, 2 * n_in, spec.nu)).copy()
    for d in range(spec.nx):
        xs[:, 2 * d, d] += eps
        xs[:, 2 * d + 1, d] -= eps
    for d in range(spec.nu):
        row = 2 * (spec.nx + d)
        us[:, row, d] += eps
        us[:, row + 1, d] -= eps
    xs = xs.reshape(-1, spec.nx)
    us = us.reshape(-1, spec.nu)
    x_next, resid = _pack_outputs(model, xs[:, : spec.nq], xs[:, spec.nq :], us)
    x_next = x_next.reshape(T, 2 * n_in, spec.nx)
    resid = resid.reshape(T, 2 * n_in, spec.nr)
    dx = (x_next[:, 0::2] - x_next[:, 1::2]) / (2 * eps)
    dr = (resid[:, 0::2] - resid[:, 1::2]) / (2 * eps)
    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dr))):
        raise NumericalDivergence(f"non-finite trajectory linearization for {spec.name}")
    A = np.swapaxes(dx[:, : spec.nx], 1, 2)
    B = np.swapaxes(dx[:, spec.nx :], 1, 2)
    C = np.swapaxes(dr[:, : spec.nx], 1, 2)
    D = np.swapaxes(dr[:, spec.nx :], 1, 2)
    return A, B, C, D


@dataclass(frozen=True)
class ParticleModel(Model):
    """Planar unit-mass double integrator chasing a goal point.

    Residual: [position - goal (2), velocity (2), control (2)].
    """

    timestep: float = 0.01
    max_force: float = 1.0
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))

    @property
    def spec(self) -> ModelSpec:
        lim = np.full(2, self.max_force)
        return ModelSpec("particle", 2, 2, 2, 6, self.timestep, -lim, lim)

    def acceleration(self, qpos, qvel, ctrl):
        return np.asarray(ctrl, dtype=float) + 0.0 * qvel

    def residual(self, qpos, qvel, ctrl):
        return np.concatenate(
            [qpos - self.goal, qvel, np.broadcast_to(ctrl, qvel.shape[:-1] + (2,))],
            axis=-1,
        )

    def with_goal(self, goal) -> "ParticleModel":
        return replace(self, goal=np.asarray(goal, dtype=float))


@dataclass(frozen=True)
class PendulumModel(Model):
    """Torque-limited pendulum; the limit is far below the gravity torque at
    horizontal (m*g*l), so a direct lift is impossible and swing-up requires
    energy pumping.

    Residual: [1 + cos(q), sin(q), velocity, control]. The first two entries
    both vanish exactly at the upright position and their norm equals
    2*sin(delta/2) for an angle delta away from upright.
    """

    timestep: float = 0.01
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    damping: float = 0.05
    max_torque: float = 2.0

    @property
    def spec(self) -> ModelSpec:
        lim = np.array([self.max_torque])
        return ModelSpec("pendulum", 1, 1, 1, 4, self.timestep, -lim, lim)

    def acceleration(self, qpos, qvel, ctrl):
        theta = qpos[..., 0]
        omega = qvel[..., 0]
        inertia = self.mass * self.length**2
        acc = (ctrl[..., 0] - self.damping * omega) / inertia - (
            self.gravity / self.length
        ) * np.sin(theta)
        return acc[..., None]

    def residual(self, qpos, qvel, ctrl):
        theta = qpos[..., 0]
        return np.stack(
            [1.0 + np.cos(theta), np.sin(theta), qvel[..., 0], ctrl[..., 0]], axis=-1
        )


@dataclass(frozen=True)
class CartPoleModel(Model):
    """Cart with a hinged point-mass pole; force acts on the cart only.

    Residual: [1 + cos(q), sin(q), cart position, cart velocity,
    pole velocity, control].
    """

    timestep: float = 0.01
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    length: float = 0.5
    gravity: float = 9.81
    max_force: float = 10.0

    @property
    def spec(self) -> ModelSpec:
        lim = np.array([self.max_force])
        return ModelSpec("cartpole", 2, 2, 1, 6, self.timestep, -lim, lim)

    def acceleration(self, qpos, qvel, ctrl):
        theta = qpos[..., 1]
        omega = qvel[..., 1]
        force = ctrl[..., 0]
        m, M, length, g = self.pole_mass, self.cart_mass, self.length, self.gravity
        sin = np.sin(theta)
        cos = np.cos(theta)
        xdd = (force + m * sin * (length * omega**2 + g * cos)) / (M + m * sin**2)
        thetadd = -(xdd * cos + g * sin) / length
        return np.stack([xdd, thetadd], axis=-1)

    def residual(self, qpos, qvel, ctrl):
        theta = qpos[..., 1]
        return np.stack(
            [
                1.0 + np.cos(theta),
                np.sin(theta),
                qpos[..., 0],
                qvel[..., 0],
                qvel[..., 1],
                ctrl[..., 0],
            ],
            axis=-1,
        )


@dataclass(frozen=True)
class AcrobotModel(Model):
    """Two-link arm actuated only at the elbow, standard textbook parameters.

    Residual: [tip height deficit below full extension, lateral tip offset,
    both joint velocities, control].
    """

    timestep: float = 0.01
    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    lc1: float = 0.5
    lc2: float = 0.5
    I1: float = 1.0
    I2: float = 1.0
    gravity: float = 9.81
    max_torque: float = 4.0

    @property
    def spec(self) -> ModelSpec:
        lim = np.array([self.max_torque])
        return ModelSpec("acrobot", 2, 2, 1, 5, self.timestep, -lim, lim)

    def acceleration(self, qpos, qvel, ctrl):
        q1, q2 = qpos[..., 0], qpos[..., 1]
        w1, w2 = qvel[..., 0], qvel[..., 1]
        tau = ctrl[..., 0]
        m1, m2, l1, lc1, lc2 = self.m1, self.m2, self.l1, self.lc1, self.lc2
        g = self.gravity
        s2, c2 = np.sin(q2), np.cos(q2)
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + self.I1 + self.I2
        d2 = m2 * (lc2**2 + l1 * lc2 * c2) + self.I2
        phi2 = m2 * lc2 * g * np.sin(q1 + q2)
        phi1 = (
            -m2 * l1 * lc2 * w2**2 * s2
            - 2 * m2 * l1 * lc2 * w2 * w1 * s2
            + (m1 * lc1 + m2 * l1) * g * np.sin(q1)
            + phi2
        )
        wd2 = (tau + (d2 / d1) * phi1 - m2 * l1 * lc2 * w1**2 * s2 - phi2) / (
            m2 * lc2**2 + self.I2 - d2**2 / d1
        )
        wd1 = -(d2 * wd2 + phi1) / d1
        return np.stack([wd1, wd2], axis=-1)

    def residual(self, qpos, qvel, ctrl):
        q1, q12 = qpos[..., 0], qpos[..., 0] + qpos[..., 1]
        tip_height = -self.l1 * np.cos(q1) - self.l2 * np.cos(q12)
        tip_x = self.l1 * np.sin(q1) + self.l2 * np.sin(q12)
        return np.stack(
            [
                (self.l1 + self.l2) - tip_height,
                tip_x,
                qvel[..., 0],
                qvel[..., 1],
                ctrl[..., 0],
            ],
            axis=-1,
        )


@dataclass(frozen=True)
class LinearModel(Model):
    """Discrete-time linear system x' = A x + B u with residual [x, u].

    The whole state lives in qpos (nv = 0); used for regulator problems
    where the planners can be checked against closed-form solutions.
    """

    A: np.ndarray = field(default_factory=lambda: np.eye(2))
    B: np.ndarray = field(default_factory=lambda: np.eye(2))
    timestep: float = 1.0
    control_limit: float = 1e9
    name: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))

    @property
    def spec(self) -> ModelSpec:
        n, m = self.B.shape
        lim = np.full(m, self.control_limit)
        return ModelSpec(self.name, n, 0, m, n + m, self.timestep, -lim, lim)

    def step_arrays(self, qpos, qvel, ctrl):
        return qpos @ self.A.T + ctrl @ self.B.T, qvel

    def acceleration(self, qpos, qvel, ctrl):
        raise NotImplementedError("linear model overrides step_arrays directly")

    def residual(self, qpos, qvel, ctrl):
        return np.concatenate([qpos, ctrl], axis=-1)


_BUILTIN = {
    "particle": ParticleModel,
    "pendulum": PendulumModel,
    "cartpole": CartPoleModel,
    "acrobot": AcrobotModel,
}

MODEL_NAMES = tuple(_BUILTIN)


def get_model(name: str, **overrides) -> Model:
    """Look up a built-in model by name; keyword overrides go to its constructor."""
    try:
        factory = _BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(_BUILTIN)}")
    return factory(**overrides)
