"""Time-indexed spline plans for control trajectories.

A plan is a sequence of knots: strictly increasing times ``tau_0..tau_P``
with a control vector attached to each. Three interpolation kinds are
supported: zero-order hold, piecewise linear, and cubic Hermite with
finite-difference slopes (Catmull-Rom style, one-sided at the ends).

All interpolants are linear in the knot values, so evaluation is a dot
product between a basis row and the value matrix. The same row doubles
as the derivative of the evaluated control with respect to the knot
values, which is what gradient-based planners chain through.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class Interpolation(enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"
    CUBIC = "cubic"


@dataclass(frozen=True)
class SplinePlan:
    """Immutable control plan: knot times, knot values, interpolation kind.

    times: shape (P+1,), strictly increasing, seconds.
    values: shape (P+1, nu).
    """

    times: np.ndarray
    values: np.ndarray
    kind: Interpolation

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if times.ndim != 1 or times.size == 0:
            raise ValueError("plan needs at least one knot time")
        if values.shape[0] != times.size:
            raise ValueError(
                f"knot count mismatch: {times.size} times vs {values.shape[0]} values"
            )
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("knot times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def num_knots(self) -> int:
        return self.times.size

    @property
    def num_controls(self) -> int:
        return self.values.shape[1]


def find_interval(times: np.ndarray, query: float) -> int:
    """Index j of the interval [tau_j, tau_{j+1}] containing ``query``.

    Largest j with tau_j <= query, clamped to [0, P-1]: queries before the
    first knot map to interval 0, queries at or past the last knot map to
    the final interval. A query exactly on a knot belongs to the interval
    starting there (lower-bound convention).
    """
    times = np.asarray(times)
    if times.size == 0:
        raise ValueError("empty knot times")
    j = int(np.searchsorted(times, query, side="right")) - 1
    return min(max(j, 0), max(times.size - 2, 0))


def _slope_row(times: np.ndarray, i: int) -> np.ndarray:
    """Coefficients of the FD slope estimate at knot i in terms of knot values.

    Interior knots average the two adjacent secant slopes; the first and
    last knot use the single available secant.
    """
    n = times.size
    row = np.zeros(n)
    if n == 1:
        return row
    if 0 < i:
        d = times[i] - times[i - 1]
        row[i] += 0.5 / d if i < n - 1 else 1.0 / d
        row[i - 1] -= 0.5 / d if i < n - 1 else 1.0 / d
    if i < n - 1:
        d = times[i + 1] - times[i]
        row[i + 1] += 0.5 / d if i > 0 else 1.0 / d
        row[i] -= 0.5 / d if i > 0 else 1.0 / d
    return row


def basis_row(plan: SplinePlan, query: float) -> np.ndarray:
    """Row w of length P+1 such that evaluate(plan, query) == w @ plan.values.

    Because splines are linear in the knot values, this row is also the
    derivative of the evaluated control with respect to each knot value
    (identical across control channels). Outside the knot range the row
    is an indicator on the nearest endpoint, matching the held-endpoint
    evaluation policy.
    """
    times = plan.times
    n = times.size
    row = np.zeros(n)
    if n == 1 or query <= times[0]:
        row[0] = 1.0
        return row
    if query >= times[-1]:
        row[-1] = 1.0
        return row
    j = find_interval(times, query)
    if plan.kind is Interpolation.ZERO:
        row[j] = 1.0
        return row
    dt = times[j + 1] - times[j]
    q = (query - times[j]) / dt
    if plan.kind is Interpolation.LINEAR:
        row[j] = 1.0 - q
        row[j + 1] = q
        return row
    # Cubic Hermite: u = a*theta_j + b*phi_j + c*theta_{j+1} + d*phi_{j+1}
    a = 2 * q**3 - 3 * q**2 + 1
    b = (q**3 - 2 * q**2 + q) * dt
    c = -2 * q**3 + 3 * q**2
    d = (q**3 - q**2) * dt
    row[j] += a
    row[j + 1] += c
    row += b * _slope_row(times, j)
    row += d * _slope_row(times, j + 1)
    return row


def basis_matrix(plan: SplinePlan, queries: np.ndarray) -> np.ndarray:
    """Stack of basis rows, shape (len(queries), P+1)."""
    return np.stack([basis_row(plan, t) for t in np.asarray(queries, dtype=float)])


def evaluate(plan: SplinePlan, query: float) -> np.ndarray:
    """Control vector at time ``query``; endpoints held outside the knot range."""
    return basis_row(plan, query) @ plan.values


def evaluate_many(plan: SplinePlan, queries: np.ndarray) -> np.ndarray:
    """Controls at several query times, shape (len(queries), nu)."""
    return basis_matrix(plan, queries) @ plan.values


def derivative_wrt_params(plan: SplinePlan, query: float) -> np.ndarray:
    """d(evaluated control)/d(knot values) at ``query``, shape (P+1,).

    Sparse by construction: only knots touching the active interval (plus
    the slope neighbours for cubic) carry nonzero coefficients.
    """
    return basis_row(plan, query)


def clamp_params(plan: SplinePlan, lower: np.ndarray, upper: np.ndarray) -> SplinePlan:
    """Clip every knot value into [lower, upper] (broadcast per channel).

    Zero and linear evaluations are then guaranteed in bounds; cubic
    interpolation can still overshoot slightly between knots, so emitted
    actions get a final clamp at the agent.
    """
    clipped = np.clip(plan.values, lower, upper)
    return replace(plan, values=clipped)


def resample(plan: SplinePlan, new_times: np.ndarray) -> SplinePlan:
    """New plan on a new knot grid, sampling the old plan at the new times.

    Used by the planner loop to slide the knot grid forward as simulation
    time advances; the interpolation kind is preserved.
    """
    new_times = np.asarray(new_times, dtype=float)
    return SplinePlan(new_times, evaluate_many(plan, new_times), plan.kind)
