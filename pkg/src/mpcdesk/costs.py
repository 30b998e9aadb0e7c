"""Composable running costs: weighted norms of residual slices plus a
risk-sensitive exponential transform.

The base cost is ``l = sum_i w_i * n_i(r_i)`` where each term applies a
twice-differentiable norm to a slice of the model residual. The final
running cost is ``c = (exp(R*l) - 1) / R`` with the risk parameter R;
R = 0 is handled by an exact identity branch, R > 0 is risk-averse, and
R < 0 is risk-seeking with costs bounded above by -1/R.

Norm closed forms (p is the smoothing scale where used):

* quadratic:          n(r) = r^T W r            (W = identity by default)
* smooth_abs:         n(r) = sum_i sqrt(r_i^2 + p^2) - p
* hyperbolic_cosine:  n(r) = sum_i (cosh(p * r_i) - 1) / p

All three vanish at the origin with zero gradient, and their gradients
and Hessians are analytic. Cost derivatives combine the norm derivatives
with residual Jacobians; second derivatives use the Gauss-Newton
approximation that drops second derivatives of the residual and adds the
rank-one risk curvature term.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Norm(enum.Enum):
    QUADRATIC = "quadratic"
    SMOOTH_ABS = "smooth_abs"
    COSH = "hyperbolic_cosine"


@dataclass(frozen=True)
class NormKind:
    """A norm choice with its smoothing scale and optional quadratic weight matrix."""

    kind: Norm
    param: float = 1.0
    weight_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.param <= 0:
            raise ValueError("norm smoothing scale must be positive")
        if self.weight_matrix is not None:
            W = np.asarray(self.weight_matrix, dtype=float)
            if self.kind is not Norm.QUADRATIC:
                raise ValueError("weight matrices only apply to the quadratic norm")
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise ValueError("weight matrix must be square")
            if not np.allclose(W, W.T):
                raise ValueError("weight matrix must be symmetric")
            np.linalg.cholesky(W)  # raises if not positive definite
            object.__setattr__(self, "weight_matrix", W)


@dataclass(frozen=True)
class CostTerm:
    """One weighted norm over a contiguous slice of the residual vector."""

    name: str
    weight: float
    norm: NormKind
    start: int
    stop: int

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"term {self.name!r}: weight must be nonnegative")
        if not (0 <= self.start < self.stop):
            raise ValueError(f"term {self.name!r}: bad residual slice")


@dataclass(frozen=True)
class CostSpec:
    """All cost terms plus the scalar risk parameter."""

    terms: tuple[CostTerm, ...]
    risk: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) == 0:
            raise ValueError("cost needs at least one term")

    def term_names(self) -> list[str]:
        return [t.name for t in self.terms]

    def with_weight(self, index, weight: float) -> "CostSpec":
        """New spec with one term's weight replaced; index may be a term
        position or a term name."""
        terms = list(self.terms)
        if isinstance(index, str):
            names = self.term_names()
            if index not in names:
                raise KeyError(f"no cost term named {index!r}; have {names}")
            index = names.index(index)
        old = terms[index]
        terms[index] = CostTerm(old.name, weight, old.norm, old.start, old.stop)
        return CostSpec(tuple(terms), self.risk)

    def with_risk(self, risk: float) -> "CostSpec":
        return CostSpec(self.terms, risk)


def norm_eval(norm: NormKind, r: np.ndarray):
    """Value, gradient, and Hessian of the norm at r (all analytic)."""
    r = np.asarray(r, dtype=float)
    p = norm.param
    if norm.kind is Norm.QUADRATIC:
        W = norm.weight_matrix
        if W is None:
            W = np.eye(r.size)
        value = float(r @ W @ r)
        return value, 2.0 * (W @ r), 2.0 * W
    if norm.kind is Norm.SMOOTH_ABS:
        root = np.sqrt(r**2 + p**2)
        return float(np.sum(root - p)), r / root, np.diag(p**2 / root**3)
    # hyperbolic cosine
    value = float(np.sum((np.cosh(p * r) - 1.0) / p))
    return value, np.sinh(p * r), np.diag(p * np.cosh(p * r))


def _norm_values(norm: NormKind, r: np.ndarray) -> np.ndarray:
    """Norm values over a batch of residual slices, shape r.shape[:-1]."""
    p = norm.param
    if norm.kind is Norm.QUADRATIC:
        if norm.weight_matrix is None:
            return np.sum(r**2, axis=-1)
        return np.einsum("...i,ij,...j->...", r, norm.weight_matrix, r)
    if norm.kind is Norm.SMOOTH_ABS:
        return np.sum(np.sqrt(r**2 + p**2) - p, axis=-1)
    return np.sum((np.cosh(p * r) - 1.0) / p, axis=-1)


def base_cost(spec: CostSpec, residual: np.ndarray) -> float:
    """Weighted sum of norm terms, always nonnegative."""
    residual = np.asarray(residual, dtype=float)
    for term in spec.terms:
        if term.stop > residual.shape[-1]:
            raise ValueError(
                f"term {term.name!r} slices past the residual (nr={residual.shape[-1]})"
            )
    return float(
        sum(
            term.weight * _norm_values(term.norm, residual[term.start : term.stop])
            for term in spec.terms
        )
    )


def term_values(spec: CostSpec, residual: np.ndarray) -> np.ndarray:
    """Weighted per-term base costs over a batch, shape (..., M)."""
    residual = np.asarray(residual, dtype=float)
    return np.stack(
        [
            term.weight * _norm_values(term.norm, residual[..., term.start : term.stop])
            for term in spec.terms
        ],
        axis=-1,
    )


def base_cost_batch(spec: CostSpec, residuals: np.ndarray) -> np.ndarray:
    """Base cost over a batch of residual vectors, shape residuals.shape[:-1]."""
    return np.sum(term_values(spec, residuals), axis=-1)


def risk_transform(l, risk: float):
    """Map base cost l through the exponential risk transform.

    Exact identity at R = 0; uses expm1 so small R*l does not cancel.
    Monotone increasing in l for every R, fixes 0, has unit slope at 0,
    and for R < 0 is bounded above by -1/R.
    """
    l = np.asarray(l, dtype=float)
    if risk == 0.0:
        out = l
    else:
        with np.errstate(over="ignore"):
            out = np.expm1(risk * l) / risk
    return float(out) if out.ndim == 0 else out


def running_cost(spec: CostSpec, residual: np.ndarray):
    """Risk-transformed cost of one residual vector (or a batch of them)."""
    return risk_transform(base_cost_batch(spec, residual), spec.risk)


def base_gradient(spec: CostSpec, residual: np.ndarray, C: np.ndarray, D: np.ndarray):
    """Gradients of the pre-transform base cost: (dl/dx, dl/du).

    C and D are the residual Jacobians with respect to state and control.
    """
    residual = np.asarray(residual, dtype=float)
    dl_dx = np.zeros(C.shape[1])
    dl_du = np.zeros(D.shape[1])
    for term in spec.terms:
        _, g, _ = norm_eval(term.norm, residual[term.start : term.stop])
        dl_dx += term.weight * (g @ C[term.start : term.stop])
        dl_du += term.weight * (g @ D[term.start : term.stop])
    return dl_dx, dl_du


def cost_gradient(spec: CostSpec, residual: np.ndarray, C: np.ndarray, D: np.ndarray):
    """Gradients of the risk-transformed cost: (dc/dx, dc/du).

    Chain rule through the transform contributes the scalar factor
    exp(R*l); at R = 0 this is the plain weighted chain rule.
    """
    dl_dx, dl_du = base_gradient(spec, residual, C, D)
    with np.errstate(over="ignore"):
        scale = np.exp(spec.risk * base_cost(spec, residual))
    return scale * dl_dx, scale * dl_du


def cost_hessian_gn(
    spec: CostSpec,
    residual: np.ndarray,
    C: np.ndarray,
    D: np.ndarray,
    dl_dx: np.ndarray,
    dl_du: np.ndarray,
):
    """Gauss-Newton second derivatives (cxx, cuu, cxu) of the transformed cost.

    Drops second derivatives of the residual, keeps the rank-one risk term
    R * outer(dl, dl). dl_dx/dl_du are the pre-transform gradients from
    base_gradient. cxx and cuu are explicitly symmetrized; they are not
    forced positive semidefinite here (see psd_project).
    """
    residual = np.asarray(residual, dtype=float)
    nx, nu = C.shape[1], D.shape[1]
    cxx = np.zeros((nx, nx))
    cuu = np.zeros((nu, nu))
    cxu = np.zeros((nx, nu))
    for term in spec.terms:
        _, _, H = norm_eval(term.norm, residual[term.start : term.stop])
        Ct = C[term.start : term.stop]
        Dt = D[term.start : term.stop]
        cxx += term.weight * (Ct.T @ H @ Ct)
        cuu += term.weight * (Dt.T @ H @ Dt)
        cxu += term.weight * (Ct.T @ H @ Dt)
    risk = spec.risk
    cxx += risk * np.outer(dl_dx, dl_dx)
    cuu += risk * np.outer(dl_du, dl_du)
    cxu += risk * np.outer(dl_dx, dl_du)
    with np.errstate(over="ignore"):
        scale = np.exp(risk * base_cost(spec, residual))
    cxx = 0.5 * scale * (cxx + cxx.T)
    cuu = 0.5 * scale * (cuu + cuu.T)
    return cxx, cuu, scale * cxu


def _term_grad_hess_batch(norm: NormKind, r: np.ndarray):
    """Norm gradient and Hessian over a (T, k) batch of residual slices.

    Returns (grad (T, k), hess, diagonal flag): the Hessian is either a
    constant (k, k) matrix (quadratic) or a (T, k) diagonal (the other
    norms are elementwise).
    """
    p = norm.param
    if norm.kind is Norm.QUADRATIC:
        W = norm.weight_matrix
        if W is None:
            W = np.eye(r.shape[-1])
        return 2.0 * r @ W, 2.0 * W, False
    if norm.kind is Norm.SMOOTH_ABS:
        root = np.sqrt(r**2 + p**2)
        return r / root, p**2 / root**3, True
    return np.sinh(p * r), p * np.cosh(p * r), True


def cost_gradient_batch(spec: CostSpec, residuals: np.ndarray, C, D):
    """cost_gradient for a whole trajectory at once.

    residuals: (T, nr); C: (T, nr, nx); D: (T, nr, nu). Returns
    (dc/dx (T, nx), dc/du (T, nu)).
    """
    residuals = np.asarray(residuals, dtype=float)
    T = residuals.shape[0]
    dl_dx = np.zeros((T, C.shape[2]))
    dl_du = np.zeros((T, D.shape[2]))
    for term in spec.terms:
        g, _, _ = _term_grad_hess_batch(term.norm, residuals[:, term.start : term.stop])
        dl_dx += term.weight * np.einsum(
            "tk,tki->ti", g, C[:, term.start : term.stop]
        )
        dl_du += term.weight * np.einsum(
            "tk,tki->ti", g, D[:, term.start : term.stop]
        )
    with np.errstate(over="ignore"):
        scale = np.exp(spec.risk * base_cost_batch(spec, residuals))[:, None]
    return scale * dl_dx, scale * dl_du


def cost_quadratics_batch(spec: CostSpec, residuals: np.ndarray, C, D):
    """Gradients and Gauss-Newton Hessian blocks for a whole trajectory.

    Batched equivalent of cost_gradient + cost_hessian_gn per step.
    Returns (cx, cu, cxx, cuu, cxu) with leading T axes; Hessian blocks
    are symmetrized but not projected (see psd_project_batch).
    """
    residuals = np.asarray(residuals, dtype=float)
    T = residuals.shape[0]
    nx, nu = C.shape[2], D.shape[2]
    dl_dx = np.zeros((T, nx))
    dl_du = np.zeros((T, nu))
    cxx = np.zeros((T, nx, nx))
    cuu = np.zeros((T, nu, nu))
    cxu = np.zeros((T, nx, nu))
    for term in spec.terms:
        Cs = C[:, term.start : term.stop]
        Ds = D[:, term.start : term.stop]
        g, h, diagonal = _term_grad_hess_batch(
            term.norm, residuals[:, term.start : term.stop]
        )
        w = term.weight
        dl_dx += w * np.einsum("tk,tki->ti", g, Cs)
        dl_du += w * np.einsum("tk,tki->ti", g, Ds)
        if diagonal:
            cxx += w * np.einsum("tki,tk,tkj->tij", Cs, h, Cs)
            cuu += w * np.einsum("tki,tk,tkj->tij", Ds, h, Ds)
            cxu += w * np.einsum("tki,tk,tkj->tij", Cs, h, Ds)
        else:
            cxx += w * np.einsum("tki,kl,tlj->tij", Cs, h, Cs)
            cuu += w * np.einsum("tki,kl,tlj->tij", Ds, h, Ds)
            cxu += w * np.einsum("tki,kl,tlj->tij", Cs, h, Ds)
    risk = spec.risk
    cxx += risk * dl_dx[:, :, None] * dl_dx[:, None, :]
    cuu += risk * dl_du[:, :, None] * dl_du[:, None, :]
    cxu += risk * dl_dx[:, :, None] * dl_du[:, None, :]
    with np.errstate(over="ignore"):
        scale = np.exp(risk * base_cost_batch(spec, residuals))
    s1 = scale[:, None]
    s2 = scale[:, None, None]
    cxx = 0.5 * s2 * (cxx + np.swapaxes(cxx, 1, 2))
    cuu = 0.5 * s2 * (cuu + np.swapaxes(cuu, 1, 2))
    return s1 * dl_dx, s1 * dl_du, cxx, cuu, s2 * cxu


def psd_project(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Nearest symmetric matrix with eigenvalues floored at ``floor``.

    The risk term can make Gauss-Newton blocks indefinite (R < 0) and
    round-off can nudge eigenvalues slightly negative; the backward pass
    requires PSD cost blocks.
    """
    sym = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(sym)
    if np.all(vals >= floor):
        return sym
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def psd_project_batch(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """psd_project over a stack of matrices with leading batch axes."""
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    vals, vecs = np.linalg.eigh(sym)
    if np.all(vals >= floor):
        return sym
    vals = np.maximum(vals, floor)
    return (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)


def total_objective(per_step_costs) -> float:
    """Objective J: plain sum of running costs over the rollout."""
    return float(np.sum(per_step_costs))
