"""Geometry of Sym+(r) under the affine-invariant metric, and of the products
``Sym+(r) x R^{r x m} x R^{p x r}`` (general systems) and
``Sym+(r) x R^{r x m}`` (gradient systems).

Points and tangent vectors are small frozen dataclasses around numpy arrays.
Tangent vectors support ``+``, ``-`` and scalar ``*`` so that iterative
solvers can treat them like vectors; the metric lives on the point.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import matlib
from .matlib import SymEig, sym

__all__ = [
    "ProductPoint",
    "ProductTangent",
    "spd_inner",
    "spd_norm",
    "spd_exp",
    "spd_grad_from_euclidean",
    "spd_hess_from_euclidean",
    "flat_exp",
    "product_inner",
    "product_norm",
    "product_exp",
    "dimension",
]


def _spd_inv(S_or_eig) -> np.ndarray:
    return matlib.check_spd(S_or_eig).apply(lambda w: 1.0 / w)


def spd_inner(S, xi1, xi2) -> float:
    """Affine-invariant inner product ``tr(S^-1 xi1 S^-1 xi2)``."""
    Sinv = _spd_inv(S)
    xi1 = matlib.as_symmetric(xi1, "xi1")
    xi2 = matlib.as_symmetric(xi2, "xi2")
    if xi1.shape != Sinv.shape or xi2.shape != Sinv.shape:
        raise ValueError("tangent shape does not match the base point")
    return _trace_prod(Sinv @ xi1, Sinv @ xi2)


def _trace_prod(M1, M2) -> float:
    # tr(M1 M2) without forming the product
    return float(np.sum(M1 * M2.T))


def spd_norm(S, xi) -> float:
    return float(np.sqrt(max(spd_inner(S, xi, xi), 0.0)))


def _exp_from_eig(eig: SymEig, xi: np.ndarray) -> np.ndarray:
    w, V = eig.eigenvalues, eig.eigenvectors
    root = np.sqrt(w)
    half = (V * root) @ V.T
    inv_half = (V / root) @ V.T
    return sym(half @ matlib.sym_exp(sym(inv_half @ xi @ inv_half)) @ half)


def spd_exp(S, xi) -> np.ndarray:
    """Exponential map ``S^1/2 exp(S^-1/2 xi S^-1/2) S^1/2``.

    Defined for every symmetric ``xi``; the result is SPD in exact
    arithmetic.  In floating point the smallest eigenvalue is resolved only
    while the condition number of the result stays below about 1/eps, and
    ``exp`` overflows beyond ``e^709`` (``OverflowError``).
    """
    eig = matlib.check_spd(S)
    xi = matlib.as_symmetric(xi, "xi")
    if xi.shape != eig.eigenvectors.shape:
        raise ValueError("tangent shape does not match the base point")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _exp_from_eig(eig, xi)
    if not np.all(np.isfinite(out)):
        raise OverflowError("exponential map overflowed; the step is too long for float64")
    if not np.linalg.eigvalsh(out)[0] > 0.0:
        raise matlib.NotPositiveDefinite("exponential map result lost positive definiteness to round-off")
    return out


def flat_exp(S, xi) -> np.ndarray:
    """Exponential map ``S + xi`` of the flat metric ``tr(xi1 xi2)``.

    Kept only to contrast with :func:`spd_exp`: this map leaves the SPD cone
    for large enough ``xi``.
    """
    return np.asarray(S, dtype=float) + np.asarray(xi, dtype=float)


def spd_grad_from_euclidean(S, eucl_grad) -> np.ndarray:
    """Riemannian gradient ``S sym(G) S`` from the Euclidean gradient ``G``."""
    S = matlib.as_symmetric(S, "S")
    G = np.asarray(eucl_grad, dtype=float)
    if G.shape != S.shape:
        raise ValueError(f"gradient shape {G.shape} does not match {S.shape}")
    return sym(S @ sym(G) @ S)


def spd_hess_from_euclidean(S, eucl_grad, eucl_grad_dderiv, xi) -> np.ndarray:
    """Riemannian Hessian-vector product from Euclidean derivatives.

    ``S sym(D G[xi]) S + sym(xi sym(G) S)`` where ``G`` is the Euclidean
    gradient and ``D G[xi]`` its directional derivative along ``xi``.
    """
    S = matlib.as_symmetric(S, "S")
    xi = matlib.as_symmetric(xi, "xi")
    G = np.asarray(eucl_grad, dtype=float)
    dG = np.asarray(eucl_grad_dderiv, dtype=float)
    if not (G.shape == dG.shape == xi.shape == S.shape):
        raise ValueError("shape mismatch")
    return sym(S @ sym(dG) @ S) + sym(xi @ sym(G) @ S)


@dataclass(frozen=True, eq=False)
class ProductPoint:
    """Point ``(A_r, B_r, C_r)``; ``C_r is None`` on the gradient-system manifold."""

    A_r: np.ndarray
    B_r: np.ndarray
    C_r: Optional[np.ndarray] = None

    def __post_init__(self):
        A_r = matlib.as_symmetric(self.A_r, "A_r")
        B_r = np.array(self.B_r, dtype=float, ndmin=2)
        r = A_r.shape[0]
        if B_r.shape[0] != r:
            raise ValueError(f"B_r has {B_r.shape[0]} rows, expected {r}")
        object.__setattr__(self, "A_r", A_r)
        object.__setattr__(self, "B_r", B_r)
        if self.C_r is not None:
            C_r = np.array(self.C_r, dtype=float, ndmin=2)
            if C_r.shape[1] != r:
                raise ValueError(f"C_r has {C_r.shape[1]} columns, expected {r}")
            object.__setattr__(self, "C_r", C_r)
        for M in (self.A_r, self.B_r, self.C_r):
            if M is not None:
                if not np.all(np.isfinite(M)):
                    raise ValueError("point has non-finite entries")
                M.setflags(write=False)
        object.__setattr__(self, "eig", matlib.check_spd(A_r, "A_r"))

    @property
    def r(self) -> int:
        return self.A_r.shape[0]

    @property
    def has_output(self) -> bool:
        return self.C_r is not None

    @cached_property
    def A_r_inv(self) -> np.ndarray:
        return self.eig.apply(lambda w: 1.0 / w)

    def zero_tangent(self) -> "ProductTangent":
        return ProductTangent(
            np.zeros_like(self.A_r),
            np.zeros_like(self.B_r),
            None if self.C_r is None else np.zeros_like(self.C_r),
        )

    def inner(self, t1: "ProductTangent", t2: "ProductTangent") -> float:
        return product_inner(self, t1, t2)

    def norm(self, t: "ProductTangent") -> float:
        return product_norm(self, t)

    def exp(self, t: "ProductTangent") -> "ProductPoint":
        return product_exp(self, t)

    def fingerprint(self) -> bytes:
        return self._fingerprint

    @cached_property
    def _fingerprint(self) -> bytes:
        # arrays are read-only, so the digest can be cached
        h = hashlib.blake2b(digest_size=16)
        for M in (self.A_r, self.B_r, self.C_r):
            if M is not None:
                h.update(np.ascontiguousarray(M).tobytes())
                h.update(repr(M.shape).encode())
        return h.digest()


@dataclass(frozen=True, eq=False)
class ProductTangent:
    """Tangent ``(xi, eta, zeta)``; ``xi`` is symmetrized on construction."""

    xi: np.ndarray
    eta: np.ndarray
    zeta: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "xi", matlib.as_symmetric(self.xi, "xi"))
        object.__setattr__(self, "eta", np.array(self.eta, dtype=float, ndmin=2))
        if self.zeta is not None:
            object.__setattr__(self, "zeta", np.array(self.zeta, dtype=float, ndmin=2))

    @classmethod
    def _raw(cls, xi, eta, zeta):
        # skips validation: used by arithmetic on already-valid tangents
        t = object.__new__(cls)
        object.__setattr__(t, "xi", xi)
        object.__setattr__(t, "eta", eta)
        object.__setattr__(t, "zeta", zeta)
        return t

    def _combine(self, other, op):
        if (self.zeta is None) != (other.zeta is None):
            raise ValueError("cannot combine tangents of different manifolds")
        zeta = None if self.zeta is None else op(self.zeta, other.zeta)
        return ProductTangent._raw(op(self.xi, other.xi), op(self.eta, other.eta), zeta)

    def __add__(self, other: "ProductTangent") -> "ProductTangent":
        return self._combine(other, np.add)

    def __sub__(self, other: "ProductTangent") -> "ProductTangent":
        return self._combine(other, np.subtract)

    def __mul__(self, a: float) -> "ProductTangent":
        a = float(a)
        zeta = None if self.zeta is None else a * self.zeta
        return ProductTangent._raw(a * self.xi, a * self.eta, zeta)

    __rmul__ = __mul__

    def __neg__(self) -> "ProductTangent":
        return self * -1.0

    def __truediv__(self, a: float) -> "ProductTangent":
        return self * (1.0 / a)

    def components(self):
        return tuple(c for c in (self.xi, self.eta, self.zeta) if c is not None)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(c)) for c in self.components())


def _check_pair(pt: ProductPoint, t: ProductTangent):
    if t.xi.shape != pt.A_r.shape or t.eta.shape != pt.B_r.shape:
        raise ValueError("tangent does not match the base point")
    if pt.C_r is None:
        if t.zeta is not None:
            raise ValueError("gradient-system point takes tangents without zeta")
    elif t.zeta is None or t.zeta.shape != pt.C_r.shape:
        raise ValueError("tangent does not match the base point")


def product_inner(pt: ProductPoint, t1: ProductTangent, t2: ProductTangent) -> float:
    """``tr(A_r^-1 xi1 A_r^-1 xi2) + tr(eta1^T eta2) [+ tr(zeta1^T zeta2)]``."""
    _check_pair(pt, t1)
    _check_pair(pt, t2)
    Ainv = pt.A_r_inv
    value = _trace_prod(Ainv @ t1.xi, Ainv @ t2.xi) + float(np.vdot(t1.eta, t2.eta))
    if t1.zeta is not None:
        value += float(np.vdot(t1.zeta, t2.zeta))
    return value


def product_norm(pt: ProductPoint, t: ProductTangent) -> float:
    return float(np.sqrt(max(product_inner(pt, t, t), 0.0)))


def product_exp(pt: ProductPoint, t: ProductTangent) -> ProductPoint:
    """Geodesic step: SPD exponential on ``A_r``, translation on ``B_r``, ``C_r``."""
    _check_pair(pt, t)
    A_new = _exp_from_eig(pt.eig, t.xi)
    C_new = None if pt.C_r is None else pt.C_r + t.zeta
    return ProductPoint(A_new, pt.B_r + t.eta, C_new)


def dimension(pt: ProductPoint) -> int:
    """Dimension of the manifold ``pt`` lives on."""
    r = pt.r
    d = r * (r + 1) // 2 + pt.B_r.size
    if pt.C_r is not None:
        d += pt.C_r.size
    return d
