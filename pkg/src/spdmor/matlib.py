"""Dense symmetric linear-algebra kernels.

Everything downstream (Gramians, the SPD exponential map, the H2 gradient)
reduces to a handful of operations on small dense symmetric matrices.  All
coefficient matrices that reach the Sylvester solver are symmetric with a
positive spectrum, so the solver works in the two eigenbases and divides
entrywise instead of running a general Schur-based method.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

__all__ = [
    "NotPositiveDefinite",
    "SpectrumOverlap",
    "SymEig",
    "SolveCounter",
    "count_solves",
    "sym",
    "as_symmetric",
    "sym_eig",
    "is_spd",
    "check_spd",
    "spd_sqrt",
    "spd_inv_sqrt",
    "sym_exp",
    "solve_sylvester",
    "solve_sylvester_eig",
    "solve_lyapunov_sym",
    "frobenius_inner",
]

SYMMETRY_TOL = 1e-10
SPD_TOL = 1e-12
SINGULARITY_TOL = 1e-12


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a matrix fails the scale-relative SPD test."""


class SpectrumOverlap(np.linalg.LinAlgError):
    """Raised when a Sylvester equation is (numerically) singular."""


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition ``S = V diag(w) V^T`` with ascending ``w``.

    ``eigenvectors=None`` marks an already diagonal matrix ``diag(w)``; the
    eigenvalues are then kept in diagonal order.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]

    @property
    def min(self) -> float:
        return float(np.min(self.eigenvalues))

    @property
    def max(self) -> float:
        return float(np.max(self.eigenvalues))

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda w: w)

    def apply(self, func) -> np.ndarray:
        """Return ``V diag(func(w)) V^T``, symmetrized."""
        V = self.eigenvectors
        if V is None:
            return np.diag(func(self.eigenvalues))
        return sym((V * func(self.eigenvalues)) @ V.T)


# Per-context solve counter; contextvars keep concurrent callers isolated.
_COUNTER: contextvars.ContextVar["SolveCounter | None"] = contextvars.ContextVar(
    "spdmor_solve_counter", default=None
)


class SolveCounter:
    """Tally of Sylvester/Lyapunov solves made inside :func:`count_solves`."""

    def __init__(self) -> None:
        self.n = 0

    def __repr__(self) -> str:
        return f"SolveCounter(n={self.n})"


@contextlib.contextmanager
def count_solves() -> Iterator[SolveCounter]:
    """Count calls to :func:`solve_sylvester` made in the ``with`` block.

    Lyapunov solves are counted once (they delegate to the Sylvester solver).

    >>> with count_solves() as c:
    ...     _ = solve_lyapunov_sym(np.eye(2), np.eye(2))
    >>> c.n
    1
    """
    counter = SolveCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


def sym(Z: np.ndarray) -> np.ndarray:
    """Symmetric part ``(Z + Z^T) / 2``."""
    return 0.5 * (Z + Z.T)


def _as_finite(Z, name: str = "matrix") -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1)
    if Z.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError(f"{name} has non-finite entries")
    return Z


def as_symmetric(S, name: str = "matrix", tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Validate a nearly symmetric square matrix and return its symmetric part.

    Asymmetry up to ``tol * ||S||_F`` is absorbed; anything larger raises
    ``ValueError``.
    """
    S = _as_finite(S, name)
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be square, got shape {S.shape}")
    defect = np.linalg.norm(S - S.T)
    if defect > tol * max(np.linalg.norm(S), np.finfo(float).tiny):
        raise ValueError(f"{name} is not symmetric (||S - S^T||_F = {defect:.3e})")
    return sym(S)


def sym_eig(S) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    if isinstance(S, SymEig):
        return S
    S = as_symmetric(S)
    w, V = np.linalg.eigh(S)
    return SymEig(w, V)


def _spd_ok(eig: SymEig) -> bool:
    return eig.min > SPD_TOL * max(1.0, eig.max)


def is_spd(S) -> bool:
    """Scale-relative SPD test: ``lambda_min > 1e-12 * max(1, lambda_max)``."""
    try:
        return _spd_ok(sym_eig(S))
    except ValueError:
        return False


def check_spd(S, name: str = "matrix") -> SymEig:
    """Return the eigendecomposition of ``S`` or raise :class:`NotPositiveDefinite`."""
    eig = S if isinstance(S, SymEig) else sym_eig(as_symmetric(S, name))
    if not _spd_ok(eig):
        raise NotPositiveDefinite(
            f"{name} is not positive definite (lambda_min = {eig.min:.3e}, "
            f"lambda_max = {eig.max:.3e})"
        )
    return eig


def spd_sqrt(S) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    return check_spd(S).apply(np.sqrt)


def spd_inv_sqrt(S) -> np.ndarray:
    """Inverse principal square root of an SPD matrix."""
    return check_spd(S).apply(lambda w: 1.0 / np.sqrt(w))


def sym_exp(H) -> np.ndarray:
    """Matrix exponential of a symmetric matrix (always SPD)."""
    return sym_eig(H).apply(np.exp)


Coefficient = Union[np.ndarray, SymEig]


def solve_sylvester(F: Coefficient, G: Coefficient, W) -> np.ndarray:
    """Solve ``F Z + Z G = W`` for symmetric ``F`` (n x n) and ``G`` (r x r).

    Both coefficients are diagonalized and the equation is solved entrywise
    in the eigenbases, ``Zhat_ij = What_ij / (lambda_i + mu_j)``.  Either
    coefficient may be passed as a precomputed :class:`SymEig`; callers that
    solve many equations with the same ``F`` should do so.

    Parameters
    ----------
    F, G
        Symmetric coefficient matrices or their eigendecompositions.
    W
        Right-hand side, shape (n, r).

    Raises
    ------
    SpectrumOverlap
        If some ``|lambda_i + mu_j|`` is below ``1e-12 (||F||_2 + ||G||_2)``.
    """
    eF, eG = sym_eig(F), sym_eig(G)
    W = _as_finite(W, "W")
    n, r = len(eF.eigenvalues), len(eG.eigenvalues)
    if W.shape != (n, r):
        raise ValueError(f"right-hand side has shape {W.shape}, expected {(n, r)}")
    denom = eF.eigenvalues[:, None] + eG.eigenvalues[None, :]
    scale = np.abs(eF.eigenvalues).max() + np.abs(eG.eigenvalues).max()
    if np.min(np.abs(denom)) < SINGULARITY_TOL * scale:
        raise SpectrumOverlap("spectra of F and -G (nearly) intersect")
    return solve_sylvester_eig(eF, eG, W, denom)


def solve_sylvester_eig(eF: SymEig, eG: SymEig, W: np.ndarray, denom=None) -> np.ndarray:
    """Unchecked core of :func:`solve_sylvester` for trusted hot loops.

    The caller guarantees a finite ``W`` of the right shape and separated
    spectra (always true when both coefficients are SPD).
    """
    counter = _COUNTER.get()
    if counter is not None:
        counter.n += 1
    if denom is None:
        denom = eF.eigenvalues[:, None] + eG.eigenvalues[None, :]
    VF, VG = eF.eigenvectors, eG.eigenvectors
    What = W if VG is None else W @ VG
    if VF is not None:
        What = VF.T @ What
    Z = What / denom
    if VG is not None:
        Z = Z @ VG.T
    return Z if VF is None else VF @ Z


def solve_lyapunov_sym(F: Coefficient, W) -> np.ndarray:
    """Solve ``F Z + Z F = W`` for symmetric ``F``, ``W``; the result is symmetric."""
    W = as_symmetric(W, "W")
    return sym(solve_sylvester(F, F, W))


def frobenius_inner(Z1, Z2) -> float:
    """``tr(Z1^T Z2)``."""
    Z1, Z2 = np.asarray(Z1, dtype=float), np.asarray(Z2, dtype=float)
    if Z1.shape != Z2.shape:
        raise ValueError(f"shape mismatch: {Z1.shape} vs {Z2.shape}")
    return float(np.vdot(Z1, Z2))
