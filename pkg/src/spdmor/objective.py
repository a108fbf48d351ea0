"""Squared H2 error of a reduced model and its Riemannian derivatives.

For a full system ``(A, B, C)`` and a reduced point ``(A_r, B_r, C_r)`` the
error ``J = ||G - G_r||^2`` and its derivatives are expressed through four
matrices solving

    A_r P + P A_r = B_r B_r^T          A X + X A_r = B B_r^T
    A_r Q + Q A_r = C_r^T C_r          A Y + Y A_r = -C^T C_r

Note the minus sign on the ``Y`` equation.  Directional derivatives of the
four solutions along a tangent ``(A_r', B_r', C_r')`` solve the same
equations with the differentiated right-hand sides.

Gradient systems (``C = B^T``, ``C_r = B_r^T``) satisfy ``Q = P`` and
``Y = -X``; the ``*_J2`` functions exploit this and solve for ``P`` and
``X`` only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lti, matlib
from .lti import GradientSystem, LtiSystem, ReducedSystem
from .manifold import ProductPoint, ProductTangent
from .matlib import sym

__all__ = [
    "StaleWorkspace",
    "GramianWorkspace",
    "DerivativeWorkspace",
    "GradientWorkspace",
    "GradientDerivativeWorkspace",
    "solve_workspace",
    "eval_J",
    "euclidean_grad_J",
    "riemannian_grad_J",
    "solve_derivative_workspace",
    "riemannian_hess_J",
    "solve_workspace2",
    "eval_J2",
    "euclidean_grad_J2",
    "riemannian_grad_J2",
    "solve_derivative_workspace2",
    "riemannian_hess_J2",
    "stiefel_point",
    "check_orthonormal",
    "eval_J3",
    "stiefel_grad_J3",
    "H2Objective",
    "GradientSystemObjective",
    "make_objective",
]


class StaleWorkspace(ValueError):
    """A workspace was used with a point it was not solved for."""


@dataclass(frozen=True, eq=False)
class GramianWorkspace:
    P: np.ndarray
    Q: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    fingerprint: bytes = field(repr=False)


@dataclass(frozen=True, eq=False)
class DerivativeWorkspace:
    Pp: np.ndarray
    Qp: np.ndarray
    Xp: np.ndarray
    Yp: np.ndarray


@dataclass(frozen=True, eq=False)
class GradientWorkspace:
    P: np.ndarray
    X: np.ndarray
    fingerprint: bytes = field(repr=False)


@dataclass(frozen=True, eq=False)
class GradientDerivativeWorkspace:
    Pp: np.ndarray
    Xp: np.ndarray


def _lyap(eig, W):
    # unchecked symmetric Lyapunov solve for internally built right-hand sides
    return sym(matlib.solve_sylvester_eig(eig, eig, W))


def _check_fresh(pt: ProductPoint, ws) -> None:
    if ws.fingerprint != pt.fingerprint():
        raise StaleWorkspace("workspace was solved for a different point")


def _check_dims(full, pt: ProductPoint, need_output: bool) -> None:
    if pt.B_r.shape[1] != full.B.shape[1]:
        raise ValueError(f"B_r has {pt.B_r.shape[1]} columns, expected {full.B.shape[1]}")
    if need_output:
        if pt.C_r is None:
            raise ValueError("point has no C_r component")
        if pt.C_r.shape[0] != full.C.shape[0]:
            raise ValueError(f"C_r has {pt.C_r.shape[0]} rows, expected {full.C.shape[0]}")
    elif pt.C_r is not None:
        raise ValueError("gradient-system points carry no C_r component")


# ---------------------------------------------------------------------------
# general systems


def solve_workspace(full: LtiSystem, pt: ProductPoint) -> GramianWorkspace:
    """Solve the four Gramian-type equations at ``pt`` (four solves)."""
    _check_dims(full, pt, need_output=True)
    A_r, B_r, C_r = pt.A_r, pt.B_r, pt.C_r
    P = matlib.solve_lyapunov_sym(pt.eig, B_r @ B_r.T)
    Q = matlib.solve_lyapunov_sym(pt.eig, C_r.T @ C_r)
    X = matlib.solve_sylvester(full.eig, pt.eig, full.B @ B_r.T)
    Y = -matlib.solve_sylvester(full.eig, pt.eig, full.C.T @ C_r)
    return GramianWorkspace(P, Q, X, Y, pt.fingerprint())


def eval_J(full: LtiSystem, pt: ProductPoint, ws: GramianWorkspace) -> float:
    """Squared H2 error at ``pt``."""
    _check_fresh(pt, ws)
    red = ReducedSystem(pt.A_r, pt.B_r, pt.C_r)
    return lti.h2_error_squared(full, red, ws)


def euclidean_grad_J(full: LtiSystem, pt: ProductPoint, ws: GramianWorkspace):
    """Euclidean gradient ``2 (-QP - Y^T X, Q B_r + Y^T B, C_r P - C X)``.

    The ``A_r`` component is not symmetric in general.
    """
    _check_fresh(pt, ws)
    P, Q, X, Y = ws.P, ws.Q, ws.X, ws.Y
    gA = -2.0 * (Q @ P + Y.T @ X)
    gB = 2.0 * (Q @ pt.B_r + Y.T @ full.B)
    gC = 2.0 * (pt.C_r @ P - full.C @ X)
    return gA, gB, gC


def riemannian_grad_J(full: LtiSystem, pt: ProductPoint, ws: GramianWorkspace) -> ProductTangent:
    gA, gB, gC = euclidean_grad_J(full, pt, ws)
    A_r = pt.A_r
    return ProductTangent(sym(A_r @ sym(gA) @ A_r), gB, gC)


def solve_derivative_workspace(
    full: LtiSystem, pt: ProductPoint, ws: GramianWorkspace, d: ProductTangent
) -> DerivativeWorkspace:
    """Directional derivatives ``P', Q', X', Y'`` along ``d`` (four solves)."""
    _check_fresh(pt, ws)
    dA, dB, dC = d.xi, d.eta, d.zeta
    B_r, C_r = pt.B_r, pt.C_r
    P, Q, X, Y = ws.P, ws.Q, ws.X, ws.Y
    Pp = _lyap(pt.eig, sym(2.0 * (dB @ B_r.T - dA @ P)))
    Qp = _lyap(pt.eig, sym(2.0 * (dC.T @ C_r - dA @ Q)))
    Xp = matlib.solve_sylvester_eig(full.eig, pt.eig, full.B @ dB.T - X @ dA)
    Yp = matlib.solve_sylvester_eig(full.eig, pt.eig, -Y @ dA - full.C.T @ dC)
    return DerivativeWorkspace(Pp, Qp, Xp, Yp)


def riemannian_hess_J(
    full: LtiSystem, pt: ProductPoint, ws: GramianWorkspace, d: ProductTangent
) -> ProductTangent:
    """Riemannian Hessian of ``J`` applied to ``d``."""
    dws = solve_derivative_workspace(full, pt, ws, d)
    A_r, B_r, C_r = pt.A_r, pt.B_r, pt.C_r
    P, Q, X, Y = ws.P, ws.Q, ws.X, ws.Y
    Pp, Qp, Xp, Yp = dws.Pp, dws.Qp, dws.Xp, dws.Yp
    curv = sym(Q @ P + Y.T @ X)
    xi = -2.0 * sym(A_r @ sym(Qp @ P + Q @ Pp + Yp.T @ X + Y.T @ Xp) @ A_r) - 2.0 * sym(
        d.xi @ curv @ A_r
    )
    eta = 2.0 * (Qp @ B_r + Q @ d.eta + Yp.T @ full.B)
    zeta = 2.0 * (d.zeta @ P + C_r @ Pp - full.C @ Xp)
    return ProductTangent._raw(xi, eta, zeta)


# ---------------------------------------------------------------------------
# gradient systems: C = B^T, C_r = B_r^T


def solve_workspace2(gsys: GradientSystem, pt: ProductPoint) -> GradientWorkspace:
    """Solve for ``P`` and ``X`` only (two solves)."""
    _check_dims(gsys, pt, need_output=False)
    B_r = pt.B_r
    P = matlib.solve_lyapunov_sym(pt.eig, B_r @ B_r.T)
    X = matlib.solve_sylvester(gsys.eig, pt.eig, gsys.B @ B_r.T)
    return GradientWorkspace(P, X, pt.fingerprint())


def eval_J2(gsys: GradientSystem, pt: ProductPoint, ws: GradientWorkspace) -> float:
    _check_fresh(pt, ws)
    B, B_r, P, X = gsys.B, pt.B_r, ws.P, ws.X
    value = (
        gsys.as_lti().h2_norm_squared
        + np.trace(B_r.T @ P @ B_r)
        - 2.0 * np.trace(B_r.T @ X.T @ B)
    )
    return lti._clamp(float(value), gsys.as_lti().h2_norm_squared)


def euclidean_grad_J2(gsys: GradientSystem, pt: ProductPoint, ws: GradientWorkspace):
    """``(-2 (P^2 - X^T X), 4 P B_r - 4 X^T B)``."""
    _check_fresh(pt, ws)
    P, X = ws.P, ws.X
    return -2.0 * (P @ P - X.T @ X), 4.0 * (P @ pt.B_r - X.T @ gsys.B)


def riemannian_grad_J2(gsys: GradientSystem, pt: ProductPoint, ws: GradientWorkspace) -> ProductTangent:
    gA, gB = euclidean_grad_J2(gsys, pt, ws)
    return ProductTangent(sym(pt.A_r @ sym(gA) @ pt.A_r), gB)


def solve_derivative_workspace2(
    gsys: GradientSystem, pt: ProductPoint, ws: GradientWorkspace, d: ProductTangent
) -> GradientDerivativeWorkspace:
    _check_fresh(pt, ws)
    dA, dB = d.xi, d.eta
    Pp = _lyap(pt.eig, sym(2.0 * (dB @ pt.B_r.T - dA @ ws.P)))
    Xp = matlib.solve_sylvester_eig(gsys.eig, pt.eig, gsys.B @ dB.T - ws.X @ dA)
    return GradientDerivativeWorkspace(Pp, Xp)


def riemannian_hess_J2(
    gsys: GradientSystem, pt: ProductPoint, ws: GradientWorkspace, d: ProductTangent
) -> ProductTangent:
    dws = solve_derivative_workspace2(gsys, pt, ws, d)
    A_r, B_r = pt.A_r, pt.B_r
    P, X, Pp, Xp = ws.P, ws.X, dws.Pp, dws.Xp
    curv = sym(P @ P - X.T @ X)
    xi = -2.0 * sym(A_r @ sym(Pp @ P + P @ Pp - Xp.T @ X - X.T @ Xp) @ A_r) - 2.0 * sym(
        d.xi @ curv @ A_r
    )
    eta = 4.0 * (Pp @ B_r + P @ d.eta) - 4.0 * Xp.T @ gsys.B
    return ProductTangent._raw(xi, eta, None)


# ---------------------------------------------------------------------------
# projection (Stiefel) parametrization


def check_orthonormal(U, tol: float = 1e-10) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] > U.shape[0]:
        raise ValueError(f"U must be tall n x r, got shape {U.shape}")
    defect = np.linalg.norm(U.T @ U - np.eye(U.shape[1]))
    if defect > tol:
        raise ValueError(f"U is not orthonormal (||U^T U - I||_F = {defect:.3e})")
    return U


def stiefel_point(full: LtiSystem, U) -> ProductPoint:
    """The projected point ``(U^T A U, U^T B, C U)``."""
    U = np.asarray(U, dtype=float)
    return ProductPoint(sym(U.T @ full.A @ U), U.T @ full.B, full.C @ U)


def eval_J3(full: LtiSystem, U) -> float:
    U = check_orthonormal(U)
    pt = stiefel_point(full, U)
    return eval_J(full, pt, solve_workspace(full, pt))


def stiefel_grad_J3(full: LtiSystem, U, ws: GramianWorkspace | None = None) -> np.ndarray:
    """Riemannian gradient of ``U -> J(U^T A U, U^T B, C U)`` on the Stiefel
    manifold with the embedded metric."""
    U = check_orthonormal(U)
    pt = stiefel_point(full, U)
    if ws is None:
        ws = solve_workspace(full, pt)
    gA, gB, gC = euclidean_grad_J(full, pt, ws)
    G = 2.0 * full.A @ U @ sym(gA) + full.B @ gB.T + full.C.T @ gC
    return G - U @ sym(U.T @ G)


# ---------------------------------------------------------------------------
# objective bundles consumed by the optimizer


class H2Objective:
    """Callbacks for general systems, bound to a full-order system.

    Works on the modal form of the system; values and derivatives with
    respect to the reduced matrices do not depend on the full-order state
    basis, but workspace matrices ``X``, ``Y`` are in modal coordinates.
    """

    def __init__(self, full: LtiSystem):
        self.original = full
        self.system = full.modal()

    def workspace(self, pt: ProductPoint) -> GramianWorkspace:
        return solve_workspace(self.system, pt)

    def cost(self, pt: ProductPoint, ws: GramianWorkspace) -> float:
        return eval_J(self.system, pt, ws)

    def gradient(self, pt: ProductPoint, ws: GramianWorkspace) -> ProductTangent:
        return riemannian_grad_J(self.system, pt, ws)

    def hessian(self, pt: ProductPoint, ws: GramianWorkspace, d: ProductTangent) -> ProductTangent:
        return riemannian_hess_J(self.system, pt, ws, d)


class GradientSystemObjective:
    """Callbacks for gradient systems (points without ``C_r``)."""

    def __init__(self, gsys: GradientSystem):
        self.original = gsys
        self.system = gsys.modal()

    def workspace(self, pt: ProductPoint) -> GradientWorkspace:
        return solve_workspace2(self.system, pt)

    def cost(self, pt: ProductPoint, ws: GradientWorkspace) -> float:
        return eval_J2(self.system, pt, ws)

    def gradient(self, pt: ProductPoint, ws: GradientWorkspace) -> ProductTangent:
        return riemannian_grad_J2(self.system, pt, ws)

    def hessian(self, pt: ProductPoint, ws: GradientWorkspace, d: ProductTangent) -> ProductTangent:
        return riemannian_hess_J2(self.system, pt, ws, d)


def make_objective(system):
    """Objective bundle for ``system``; objects already exposing the four
    callbacks (``workspace``, ``cost``, ``gradient``, ``hessian``) pass through."""
    if all(hasattr(system, a) for a in ("workspace", "cost", "gradient", "hessian")):
        return system
    if isinstance(system, GradientSystem):
        return GradientSystemObjective(system)
    if isinstance(system, LtiSystem):
        return H2Objective(system)
    raise TypeError(f"unsupported system type {type(system).__name__}")
