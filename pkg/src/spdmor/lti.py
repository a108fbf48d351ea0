"""Continuous-time LTI systems ``x' = -A x + B u, y = C x`` with SPD ``A``.

H2 quantities are computed from Gramian traces only.  The full-order
eigendecomposition of ``A`` is cached on the system object, so repeated
Sylvester solves against ``A`` cost two matrix products each.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as spla

from . import matlib
from .matlib import SymEig

__all__ = [
    "LtiSystem",
    "GradientSystem",
    "ReducedSystem",
    "controllability_gramian",
    "observability_gramian",
    "h2_norm_squared",
    "h2_norm",
    "h2_error_squared",
    "h2_error_squared_dual",
    "h2_error",
    "augmented_error_system",
]

NEGATIVE_FLOOR = -1e-12


def _matrix(M, name):
    M = np.array(M, dtype=float, copy=True)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Full-order system with symmetric positive definite ``A``.

    The state transition matrix is ``-A``, so positive definiteness of ``A``
    is exactly stability.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = matlib.as_symmetric(_matrix(self.A, "A"), "A")
        A.setflags(write=False)
        B, C = _matrix(self.B, "B"), _matrix(self.C, "C")
        n = A.shape[0]
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        # validates SPD and caches the decomposition
        object.__setattr__(self, "eig", matlib.check_spd(A, "A"))

    eig: SymEig = field(init=False, repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def controllability_gramian(self) -> np.ndarray:
        return matlib.solve_lyapunov_sym(self.eig, self.B @ self.B.T)

    @cached_property
    def observability_gramian(self) -> np.ndarray:
        return matlib.solve_lyapunov_sym(self.eig, self.C.T @ self.C)

    @cached_property
    def h2_norm_squared(self) -> float:
        return float(np.trace(self.C @ self.controllability_gramian @ self.C.T))

    @cached_property
    def _modal(self) -> "LtiSystem":
        V = self.eig.eigenvectors
        modal = LtiSystem(np.diag(self.eig.eigenvalues), V.T @ self.B, self.C @ V)
        object.__setattr__(modal, "eig", SymEig(self.eig.eigenvalues, None))
        return modal

    def modal(self) -> "LtiSystem":
        """Equivalent system in the eigenbasis of ``A`` (same transfer function).

        Sylvester solves against a diagonal ``A`` skip both n x n basis
        changes.
        """
        if self.eig.eigenvectors is None:
            return self
        return self._modal

    def is_gradient_system(self, tol: float = 0.0) -> bool:
        """True when ``C = B^T`` up to ``tol * ||B||_F``."""
        if self.C.shape != self.B.T.shape:
            return False
        return bool(np.linalg.norm(self.C - self.B.T) <= tol * np.linalg.norm(self.B))


@dataclass(frozen=True, eq=False)
class GradientSystem:
    """Gradient system: stored as ``(A, B)``; the output matrix is ``B^T``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        lti = LtiSystem(self.A, self.B, np.asarray(self.B, dtype=float).T)
        object.__setattr__(self, "A", lti.A)
        object.__setattr__(self, "B", lti.B)
        object.__setattr__(self, "_lti", lti)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def eig(self) -> SymEig:
        return self._lti.eig

    def as_lti(self) -> LtiSystem:
        return self._lti

    def modal(self) -> "GradientSystem":
        """Equivalent gradient system in the eigenbasis of ``A``."""
        if self.eig.eigenvectors is None:
            return self
        V = self.eig.eigenvectors
        out = GradientSystem(np.diag(self.eig.eigenvalues), V.T @ self.B)
        object.__setattr__(out._lti, "eig", SymEig(self.eig.eigenvalues, None))
        return out

    @property
    def C(self) -> np.ndarray:
        return self._lti.C


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Reduced triple ``(A_r, B_r, C_r)``.

    With ``check=True`` (the default) ``A_r`` must be symmetric positive
    definite.  Methods that do not preserve structure, such as balanced
    truncation, build instances with ``check=False``; :attr:`is_structured`
    then reports whether the structure happens to hold.
    """

    A_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        A_r = _matrix(self.A_r, "A_r")
        B_r, C_r = _matrix(self.B_r, "B_r"), _matrix(self.C_r, "C_r")
        r = A_r.shape[0]
        if A_r.shape != (r, r) or r < 1:
            raise ValueError(f"A_r must be square, got shape {A_r.shape}")
        if B_r.shape[0] != r or C_r.shape[1] != r:
            raise ValueError("inconsistent reduced dimensions")
        if self.check:
            A_r = matlib.as_symmetric(A_r, "A_r")
            matlib.check_spd(A_r, "A_r")
            A_r.setflags(write=False)
        object.__setattr__(self, "A_r", A_r)
        object.__setattr__(self, "B_r", B_r)
        object.__setattr__(self, "C_r", C_r)

    @property
    def r(self) -> int:
        return self.A_r.shape[0]

    @property
    def symmetry_defect(self) -> float:
        return float(np.linalg.norm(self.A_r - self.A_r.T))

    @property
    def is_structured(self) -> bool:
        """Symmetric (to 1e-10 relative) and SPD."""
        if self.symmetry_defect > matlib.SYMMETRY_TOL * np.linalg.norm(self.A_r):
            return False
        return matlib.is_spd(self.A_r)

    def is_stable(self) -> bool:
        return bool(np.all(np.linalg.eigvals(self.A_r).real > 0))


def controllability_gramian(sys: LtiSystem) -> np.ndarray:
    """Solve ``A S + S A = B B^T``."""
    return sys.controllability_gramian


def observability_gramian(sys: LtiSystem) -> np.ndarray:
    """Solve ``A S + S A = C^T C``."""
    return sys.observability_gramian


def h2_norm_squared(sys: LtiSystem) -> float:
    """``||G||_H2^2 = tr(C Sc C^T)``."""
    return sys.h2_norm_squared


def h2_norm(sys: LtiSystem) -> float:
    return float(np.sqrt(max(sys.h2_norm_squared, 0.0)))


def _reduced_gramians(full: LtiSystem, red: ReducedSystem):
    eig_r = matlib.sym_eig(red.A_r)
    P = matlib.solve_lyapunov_sym(eig_r, red.B_r @ red.B_r.T)
    X = matlib.solve_sylvester(full.eig, eig_r, full.B @ red.B_r.T)
    return P, X


def _check_shapes(full, red):
    if red.B_r.shape[1] != full.m or red.C_r.shape[0] != full.p:
        raise ValueError("reduced system has different input/output dimensions")


def h2_error_squared(full: LtiSystem, red: ReducedSystem, ws=None) -> float:
    """``||G - G_r||_H2^2 = tr(C Sc C^T + C_r P C_r^T - 2 C_r X^T C^T)``.

    ``ws`` is anything carrying the matching ``P`` (r x r) and ``X`` (n x r);
    it is solved here when omitted.  Structure-violating reduced systems
    (non-symmetric ``A_r``) are evaluated through the augmented error system
    instead.  Negative results above ``-1e-12 * max(1, ||G||^2)`` are clamped
    to zero.
    """
    _check_shapes(full, red)
    if not red.is_structured:
        return _h2_error_squared_general(full, red)
    if ws is None:
        P, X = _reduced_gramians(full, red)
    else:
        P, X = ws.P, ws.X
        if P.shape != (red.r, red.r) or X.shape != (full.n, red.r):
            raise ValueError("workspace does not match the systems' dimensions")
    C, C_r = full.C, red.C_r
    value = (
        full.h2_norm_squared
        + np.trace(C_r @ P @ C_r.T)
        - 2.0 * np.trace(C_r @ X.T @ C.T)
    )
    return _clamp(float(value), full.h2_norm_squared)


def h2_error_squared_dual(full: LtiSystem, red: ReducedSystem, ws) -> float:
    """Observability form ``tr(B^T So B + B_r^T Q B_r + 2 B^T Y B_r)``."""
    Q, Y = ws.Q, ws.Y
    B, B_r = full.B, red.B_r
    So = full.observability_gramian
    value = np.trace(B.T @ So @ B) + np.trace(B_r.T @ Q @ B_r) + 2.0 * np.trace(B.T @ Y @ B_r)
    return _clamp(float(value), full.h2_norm_squared)


def _clamp(value: float, scale: float = 1.0) -> float:
    if value < 0.0:
        if value < NEGATIVE_FLOOR * max(1.0, scale):
            raise ArithmeticError(f"negative squared H2 error {value:.3e}")
        return 0.0
    return value


def augmented_error_system(full: LtiSystem, red: ReducedSystem):
    """Block matrices ``(diag(A, A_r), [B; B_r], [C, -C_r])`` of ``G - G_r``."""
    n, r = full.n, red.r
    Ae = np.zeros((n + r, n + r))
    Ae[:n, :n] = full.A
    Ae[n:, n:] = red.A_r
    Be = np.vstack([full.B, red.B_r])
    Ce = np.hstack([full.C, -red.C_r])
    return Ae, Be, Ce


def _h2_error_squared_general(full: LtiSystem, red: ReducedSystem) -> float:
    if not red.is_stable():
        return float("inf")
    Ae, Be, Ce = augmented_error_system(full, red)
    # -Ae S - S Ae^T + Be Be^T = 0
    S = spla.solve_continuous_lyapunov(-Ae, -Be @ Be.T)
    return _clamp(float(np.trace(Ce @ S @ Ce.T)), full.h2_norm_squared)


def h2_error(full: LtiSystem, red: ReducedSystem, ws=None) -> float:
    """``||G - G_r||_H2`` (not squared)."""
    return float(np.sqrt(h2_error_squared(full, red, ws)))
