"""Reference reductions: balanced truncation and projection onto a Stiefel
point, plus an orchestrator that runs them next to the trust-region method.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lti, matlib
from .lti import GradientSystem, LtiSystem, ReducedSystem
from .manifold import ProductPoint
from .matlib import sym
from .objective import check_orthonormal, euclidean_grad_J, solve_workspace, stiefel_point
from .optimizer import TrustRegionConfig, trust_region_minimize

__all__ = [
    "NonMinimalWarning",
    "LineSearchError",
    "ReductionReport",
    "StiefelConfig",
    "balanced_truncation",
    "hankel_singular_values",
    "qr_retraction",
    "polar_orthonormalize",
    "stiefel_descent",
    "project_to_manifold",
    "report_for",
    "compare_methods",
]

log = logging.getLogger(__name__)


class NonMinimalWarning(UserWarning):
    """Hankel singular values at the truncation boundary are negligible."""


class LineSearchError(RuntimeError):
    def __init__(self, msg, U=None, grad_norm=None):
        super().__init__(msg)
        self.U = U
        self.grad_norm = grad_norm


@dataclass
class ReductionReport:
    method: str
    reduced: ReducedSystem
    h2_error: float
    relative_h2_error: float
    symmetry_defect: float
    spd_flag: bool
    wall_time: float
    iterations: Optional[int] = None
    grad_norm: Optional[float] = None
    status: str = "done"
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def r(self) -> int:
        return self.reduced.r


def report_for(
    method: str,
    full: LtiSystem,
    red: ReducedSystem,
    wall_time: float,
    iterations=None,
    grad_norm=None,
    status="done",
) -> ReductionReport:
    err = lti.h2_error(full, red)
    norm = lti.h2_norm(full)
    return ReductionReport(
        method=method,
        reduced=red,
        h2_error=err,
        relative_h2_error=err / norm if norm > 0 else math.inf,
        symmetry_defect=red.symmetry_defect,
        spd_flag=red.is_structured,
        wall_time=wall_time,
        iterations=iterations,
        grad_norm=grad_norm,
        status=status,
    )


def _psd_factor(S):
    w, V = np.linalg.eigh(sym(S))
    return V * np.sqrt(np.clip(w, 0.0, None))


def hankel_singular_values(full: LtiSystem) -> np.ndarray:
    Lc = _psd_factor(full.controllability_gramian)
    Lo = _psd_factor(full.observability_gramian)
    return np.linalg.svd(Lo.T @ Lc, compute_uv=False)


def balanced_truncation(full: LtiSystem, r: int, return_projection: bool = False):
    """Square-root balanced truncation to order ``r``.

    The result realizes the balanced-truncation transfer function; its
    ``A_r`` is generally not symmetric, so it is returned unchecked.  With
    ``return_projection=True`` the right projection basis ``T`` (n x r) is
    returned as well.
    """
    if not 1 <= r <= full.n:
        raise ValueError(f"r must satisfy 1 <= r <= n={full.n}, got {r}")
    Lc = _psd_factor(full.controllability_gramian)
    Lo = _psd_factor(full.observability_gramian)
    Z, s, Wt = np.linalg.svd(Lo.T @ Lc)
    if s[r - 1] <= 0.0:
        raise ValueError("system is not minimal: zero Hankel singular value kept")
    if s[r - 1] < 1e-12 * s[0]:
        warnings.warn(
            f"Hankel singular value {s[r - 1]:.3e} at the truncation boundary is "
            f"negligible relative to {s[0]:.3e}",
            NonMinimalWarning,
            stacklevel=2,
        )
    scale = 1.0 / np.sqrt(s[:r])
    T = (Lc @ Wt[:r].T) * scale
    W = (Lo @ Z[:, :r]) * scale
    red = ReducedSystem(W.T @ full.A @ T, W.T @ full.B, full.C @ T, check=False)
    if return_projection:
        return red, T
    return red


def qr_retraction(U, xi):
    """``qf(U + xi)``: Q factor with positive diagonal R."""
    Q, R = np.linalg.qr(U + xi)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def polar_orthonormalize(U):
    """Closest matrix with orthonormal columns (polar factor)."""
    W, _, Vt = np.linalg.svd(np.asarray(U, dtype=float), full_matrices=False)
    return W @ Vt


@dataclass(frozen=True)
class StiefelConfig:
    grad_tol: Optional[float] = None  # None: 1e-8 max(1, J(U0))
    max_iters: int = 1000
    armijo: float = 1e-4
    shrink: float = 0.5
    min_step: float = 1e-16


def _j3_and_grad(full, U):
    pt = stiefel_point(full, U)
    ws = solve_workspace(full, pt)
    red = ReducedSystem(pt.A_r, pt.B_r, pt.C_r)
    J = lti.h2_error_squared(full, red, ws)
    gA, gB, gC = euclidean_grad_J(full, pt, ws)
    G = 2.0 * full.A @ U @ sym(gA) + full.B @ gB.T + full.C.T @ gC
    return J, G - U @ sym(U.T @ G)


def stiefel_descent(
    full: LtiSystem,
    r: int,
    U0=None,
    cfg: StiefelConfig = StiefelConfig(),
    strict: bool = True,
):
    """Gradient descent over ``U`` in St(r, n) for ``J(U^T A U, U^T B, C U)``.

    Trial steps use the Barzilai-Borwein length, accepted only after an
    Armijo backtracking test, so ``J`` never increases.  ``U0=None`` starts
    from the orthonormalized balanced-truncation basis.

    With ``strict=False`` a line-search failure ends the run (status
    ``"line search failed"``) instead of raising :class:`LineSearchError`.
    """
    if not 1 <= r < full.n:
        raise ValueError(f"r must be less than n={full.n}")
    t0 = time.perf_counter()
    if U0 is None:
        _, T = balanced_truncation(full, r, return_projection=True)
        U0 = polar_orthonormalize(T)
    U = check_orthonormal(U0)
    if U.shape != (full.n, r):
        raise ValueError(f"U0 has shape {U.shape}, expected {(full.n, r)}")
    J, G = _j3_and_grad(full, U)
    gnorm = float(np.linalg.norm(G))
    tol = cfg.grad_tol if cfg.grad_tol is not None else 1e-8 * max(1.0, J)
    step = 1.0 / max(gnorm, 1e-300)
    status = "max_iters"
    k = 0
    U_prev = G_prev = None
    while True:
        if gnorm <= tol:
            status = "converged"
            break
        if k >= cfg.max_iters:
            break
        if U_prev is not None:
            S, Yd = U - U_prev, G - G_prev
            sy = float(np.vdot(S, Yd))
            if sy > 0:
                step = float(np.vdot(S, S)) / sy
        t = step
        while True:
            U_new = qr_retraction(U, -t * G)
            J_new, G_new = _j3_and_grad(full, U_new)
            if J_new <= J - cfg.armijo * t * gnorm**2:
                break
            t *= cfg.shrink
            if t < cfg.min_step:
                if strict:
                    raise LineSearchError("line search failed", U=U, grad_norm=gnorm)
                status = "line search failed"
                break
        if status == "line search failed":
            break
        U_prev, G_prev = U, G
        U, J, G = U_new, J_new, G_new
        gnorm = float(np.linalg.norm(G))
        k += 1
    pt = stiefel_point(full, U)
    red = ReducedSystem(pt.A_r, pt.B_r, pt.C_r)
    report = report_for(
        "stiefel", full, red, time.perf_counter() - t0, iterations=k, grad_norm=gnorm, status=status
    )
    log.info("stiefel: %s after %d iterations, |grad|=%.3e, J=%.6e", status, k, gnorm, J)
    return U, report


def project_to_manifold(red: ReducedSystem, floor: float = 1e-6) -> ProductPoint:
    """Nearest structured point to an unstructured reduced model.

    ``A_r`` is symmetrized and its eigenvalues are clamped from below at
    ``floor * lambda_max``; ``B_r`` and ``C_r`` are kept.
    """
    w, V = np.linalg.eigh(sym(red.A_r))
    top = max(abs(w[-1]), np.finfo(float).tiny)
    w = np.maximum(w, floor * top)
    return ProductPoint(sym((V * w) @ V.T), red.B_r, red.C_r)


def _tr_report(method, full, x, state, t0):
    red = ReducedSystem(x.A_r, x.B_r, x.C_r if x.C_r is not None else x.B_r.T)
    rep = report_for(
        method, full, red, time.perf_counter() - t0,
        iterations=state.iter, grad_norm=state.grad_norm, status=state.status,
    )
    rep.extra["history"] = state.history
    return rep


def compare_methods(
    full: LtiSystem,
    r: int,
    U0=None,
    seed: Optional[int] = None,
    tr_config: TrustRegionConfig = TrustRegionConfig(),
    stiefel_config: StiefelConfig = StiefelConfig(),
) -> list[ReductionReport]:
    """Run balanced truncation, Stiefel descent and the trust-region method.

    The trust-region run starts from the Stiefel result ``(U^T A U, U^T B,
    C U)``.  Gradient systems additionally get the ``tr-gradient`` run from
    ``(U^T A U, U^T B)``.  The Stiefel start is ``U0`` if given, else a
    seeded random orthonormal matrix if ``seed`` is given, else the
    balanced-truncation basis.  Reports are sorted by relative error.
    """
    if not 1 <= r < full.n:
        raise ValueError(f"r must be less than n={full.n}")
    reports = []

    t0 = time.perf_counter()
    bt = balanced_truncation(full, r)
    reports.append(report_for("bt", full, bt, time.perf_counter() - t0))

    if U0 is None and seed is not None:
        rng = np.random.default_rng(seed)
        U0 = polar_orthonormalize(rng.standard_normal((full.n, r)))
    U, st_report = stiefel_descent(full, r, U0, stiefel_config, strict=False)
    reports.append(st_report)

    t0 = time.perf_counter()
    x, state = trust_region_minimize(full, stiefel_point(full, U), tr_config)
    reports.append(_tr_report("tr", full, x, state, t0))

    if full.is_gradient_system():
        gsys = GradientSystem(full.A, full.B)
        t0 = time.perf_counter()
        init = ProductPoint(sym(U.T @ full.A @ U), U.T @ full.B)
        x2, state2 = trust_region_minimize(gsys, init, tr_config)
        reports.append(_tr_report("tr-gradient", full, x2, state2, t0))

    reports.sort(key=lambda rep: rep.relative_h2_error)
    return reports
