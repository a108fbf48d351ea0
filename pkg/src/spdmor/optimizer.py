"""Riemannian trust-region minimization with a truncated CG inner solver.

The outer loop follows the classical ratio test: the radius shrinks by 4
when ``rho < 1/4``, doubles (capped at ``delta_bar``) when ``rho > 3/4`` and
the step reached the boundary, and otherwise stays put.  A candidate is
accepted when ``rho > rho_prime``.  Candidates are always produced by the
exponential map of the product manifold, so every iterate keeps an SPD
``A_r``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .manifold import ProductPoint, ProductTangent, dimension
from .matlib import NotPositiveDefinite
from .objective import make_objective

__all__ = [
    "TcgConfig",
    "TrustRegionConfig",
    "TrustRegionState",
    "IterationRecord",
    "TcgResult",
    "solve_tcg",
    "boundary_step_to_radius",
    "update_radius",
    "trust_region_minimize",
]

log = logging.getLogger(__name__)

MIN_RADIUS = 1e-14


@dataclass(frozen=True)
class TcgConfig:
    """Truncated CG stopping constants.

    ``max_inner_iters=None`` means the dimension of the manifold.
    """

    theta: float = 1.0
    kappa: float = 0.1
    max_inner_iters: Optional[int] = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if self.max_inner_iters is not None and self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be positive")


@dataclass(frozen=True)
class TrustRegionConfig:
    """Outer-loop parameters.

    ``None`` entries are resolved at the initial point: ``delta_bar =
    10 (1 + ||grad J(x0)||)``, ``delta0 = delta_bar / 8`` and ``grad_tol =
    1e-8 max(1, |J(x0)|)``.

    ``rho_regularization`` adds ``reg * eps * max(1, |J|)`` to both the
    actual and predicted decrease before forming the ratio; it keeps the
    test meaningful once decreases reach round-off level.  Set it to 0 for
    the bare ratio.
    """

    delta_bar: Optional[float] = None
    delta0: Optional[float] = None
    rho_prime: float = 0.1
    max_outer_iters: int = 500
    grad_tol: Optional[float] = None
    tcg: TcgConfig = field(default_factory=TcgConfig)
    rho_regularization: float = 1e3

    def __post_init__(self):
        if not 0 <= self.rho_prime < 0.25:
            raise ValueError("rho_prime must lie in [0, 1/4)")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be non-negative")
        if self.delta_bar is not None and not self.delta_bar > 0:
            raise ValueError("delta_bar must be positive")
        if self.delta0 is not None:
            cap = self.delta_bar if self.delta_bar is not None else math.inf
            if not 0 < self.delta0 < cap:
                raise ValueError("delta0 must lie in (0, delta_bar)")
        if self.grad_tol is not None and self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")
        if self.rho_regularization < 0:
            raise ValueError("rho_regularization must be non-negative")

    def resolved(self, J0: float, grad_norm0: float) -> "TrustRegionConfig":
        delta_bar = self.delta_bar if self.delta_bar is not None else 10.0 * (1.0 + grad_norm0)
        delta0 = self.delta0 if self.delta0 is not None else delta_bar / 8.0
        grad_tol = self.grad_tol if self.grad_tol is not None else 1e-8 * max(1.0, abs(J0))
        return replace(self, delta_bar=delta_bar, delta0=min(delta0, delta_bar), grad_tol=grad_tol)


class IterationRecord(NamedTuple):
    iter: int
    J: float
    grad_norm: float
    delta: float
    rho: float
    accepted: bool
    inner_iters: int
    tcg_stop: str


@dataclass
class TrustRegionState:
    iterate: ProductPoint
    delta_k: float
    last_rho: float
    grad_norm: float
    J_value: float
    iter: int = 0
    status: str = "running"
    history: list = field(default_factory=list)
    config: Optional[TrustRegionConfig] = None
    hessian_calls: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class TcgResult(NamedTuple):
    step: ProductTangent
    hit_boundary: bool
    stop_reason: str
    iterations: int
    Hstep: ProductTangent


def boundary_step_to_radius(
    pt: ProductPoint, base: ProductTangent, direction: ProductTangent, delta: float
) -> tuple[ProductTangent, float]:
    """Return ``(base + tau * direction, tau)`` with ``||.||_pt = delta`` and ``tau > 0``."""
    bb = pt.inner(base, base)
    bd = pt.inner(base, direction)
    dd = pt.inner(direction, direction)
    if not dd > 0:
        raise ValueError("direction must be nonzero")
    # positive root of dd tau^2 + 2 bd tau + (bb - delta^2) = 0, written to avoid cancellation
    c = bb - delta * delta
    disc = math.sqrt(max(bd * bd - dd * c, 0.0))
    if bd >= 0:
        tau = -c / (bd + disc) if (bd + disc) > 0 else 0.0
    else:
        tau = (disc - bd) / dd
    assert tau >= 0, "no positive boundary intersection"
    return base + tau * direction, tau


def solve_tcg(
    pt: ProductPoint,
    grad: ProductTangent,
    hess_op: Callable[[ProductTangent], ProductTangent],
    delta: float,
    cfg: TcgConfig = TcgConfig(),
) -> TcgResult:
    """Steihaug-Toint truncated CG for ``min <g,t> + 1/2 <H t, t>``, ``||t|| <= delta``.

    Starts from zero, so the first iterate already achieves Cauchy decrease.
    ``Hstep`` is ``H[step]`` assembled from the products computed along the
    way, which lets the caller evaluate the model without another Hessian
    call.
    """
    max_inner = cfg.max_inner_iters or dimension(pt)
    inner = pt.inner
    eta = pt.zero_tangent()
    Heta = pt.zero_tangent()
    r = grad
    rr = inner(r, r)
    r0_norm = math.sqrt(rr)
    target = r0_norm * min(cfg.kappa, r0_norm**cfg.theta)
    d = -r
    e_Pe = 0.0  # <eta, eta>
    e_Pd = 0.0  # <eta, d>
    d_Pd = rr
    delta2 = delta * delta
    for j in range(1, max_inner + 1):
        Hd = hess_op(d)
        dHd = inner(d, Hd)
        if not (math.isfinite(dHd) and Hd.is_finite()):
            raise FloatingPointError("non-finite Hessian-vector product in tCG")
        alpha = rr / dHd if dHd != 0 else math.inf
        e_Pe_new = e_Pe + 2.0 * alpha * e_Pd + alpha * alpha * d_Pd
        if dHd <= 0 or e_Pe_new >= delta2:
            step, tau = boundary_step_to_radius(pt, eta, d, delta)
            reason = "negative curvature" if dHd <= 0 else "exceeded trust region"
            return TcgResult(step, True, reason, j, Heta + tau * Hd)
        eta = eta + alpha * d
        Heta = Heta + alpha * Hd
        r = r + alpha * Hd
        rr_new = inner(r, r)
        if math.sqrt(rr_new) <= target:
            return TcgResult(eta, False, "residual tolerance", j, Heta)
        beta = rr_new / rr
        rr = rr_new
        d = -r + beta * d
        e_Pe = e_Pe_new
        e_Pd = beta * (e_Pd + alpha * d_Pd)
        d_Pd = rr + beta * beta * d_Pd
    return TcgResult(eta, False, "max inner iterations", max_inner, Heta)


def update_radius(delta: float, rho: float, hit_boundary: bool, delta_bar: float) -> float:
    """Radius rule of the outer iteration."""
    if rho < 0.25:
        return 0.25 * delta
    if rho > 0.75 and hit_boundary:
        return min(2.0 * delta, delta_bar)
    return delta


def trust_region_minimize(
    system,
    init: ProductPoint,
    cfg: TrustRegionConfig = TrustRegionConfig(),
    callback: Optional[Callable[[IterationRecord], None]] = None,
) -> tuple[ProductPoint, TrustRegionState]:
    """Minimize the squared H2 error over the product manifold.

    Parameters
    ----------
    system
        :class:`~spdmor.lti.LtiSystem` (general problem, ``init`` must carry
        ``C_r``) or :class:`~spdmor.lti.GradientSystem` (``init`` without
        ``C_r``).
    init
        Starting point.
    cfg
        Parameters; unset values are resolved at ``init``.
    callback
        Called with each :class:`IterationRecord`.

    Returns
    -------
    point, state
        ``state.status`` is ``"converged"`` (gradient norm at or below
        ``grad_tol``), ``"max_iters"`` or ``"stagnated"`` (radius fell below
        1e-14).
    """
    obj = make_objective(system)
    x = init
    ws = obj.workspace(x)
    J = obj.cost(x, ws)
    g = obj.gradient(x, ws)
    gnorm = x.norm(g)
    cfg = cfg.resolved(J, gnorm)
    delta = cfg.delta0
    state = TrustRegionState(x, delta, math.nan, gnorm, J, config=cfg)
    eps_reg = cfg.rho_regularization * np.finfo(float).eps

    def hess_op(d):
        state.hessian_calls += 1
        return obj.hessian(x, ws, d)

    k = 0
    while True:
        if gnorm <= cfg.grad_tol:
            state.status = "converged"
            break
        if k >= cfg.max_outer_iters:
            state.status = "max_iters"
            break
        if delta < MIN_RADIUS:
            state.status = "stagnated"
            break

        res = solve_tcg(x, g, hess_op, delta, cfg.tcg)
        step = res.step
        model_decrease = -(x.inner(g, step) + 0.5 * x.inner(res.Hstep, step))
        try:
            x_new = x.exp(step)
            ws_new = obj.workspace(x_new)
            J_new = obj.cost(x_new, ws_new)
        except (NotPositiveDefinite, OverflowError):
            # exp stays in the cone mathematically; round-off or overflow on
            # a very long step counts as a failed step
            x_new, J_new = None, math.inf
        if not math.isfinite(J_new) and x_new is not None:
            raise FloatingPointError("objective became non-finite")

        reg = eps_reg * max(1.0, abs(J))
        if model_decrease <= 0 or not math.isfinite(J_new):
            rho = -math.inf
        else:
            rho = ((J - J_new) + reg) / (model_decrease + reg)

        step_norm = x.norm(step)
        at_boundary = res.hit_boundary or abs(step_norm - delta) <= 1e-10 * delta
        delta = update_radius(delta, rho, at_boundary, cfg.delta_bar)
        # the regularized ratio can exceed rho_prime on round-off noise, so an
        # increase in J is vetoed explicitly
        accepted = rho > cfg.rho_prime and J_new <= J
        if accepted:
            assert np.linalg.eigvalsh(x_new.A_r)[0] > 0.0
            x, ws, J = x_new, ws_new, J_new
            g = obj.gradient(x, ws)
            gnorm = x.norm(g)
        k += 1

        rec = IterationRecord(
            k, float(J), float(gnorm), float(delta), float(rho), bool(accepted), res.iterations, res.stop_reason
        )
        state.history.append(rec)
        state.iterate, state.delta_k, state.last_rho = x, delta, rho
        state.grad_norm, state.J_value, state.iter = gnorm, J, k
        log.debug(
            "iter %d  J=%.12e  |grad|=%.3e  delta=%.3e  rho=%.3f  %s  (%d inner, %s)",
            k, J, gnorm, delta, rho, "acc" if accepted else "REJ", res.iterations, res.stop_reason,
        )
        if callback is not None:
            callback(rec)

    state.iterate, state.grad_norm, state.J_value, state.delta_k = x, gnorm, J, delta
    return x, state
