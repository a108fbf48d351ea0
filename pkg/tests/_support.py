"""Random generators shared by the tests."""

import numpy as np

from spdmor.lti import LtiSystem
from spdmor.manifold import ProductPoint, ProductTangent
from spdmor.matlib import sym


def rand_spd(rng, n, cond=10.0, scale=1.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = scale * np.geomspace(1.0, cond, n) if n > 1 else np.array([scale])
    return sym((Q * rng.permutation(w)) @ Q.T)


def rand_sym(rng, n):
    return sym(rng.standard_normal((n, n)))


def rand_system(rng, n, m, p, cond=20.0):
    return LtiSystem(rand_spd(rng, n, cond), rng.standard_normal((n, m)), rng.standard_normal((p, n)))


def rand_point(rng, r, m, p=None, cond=5.0):
    C_r = None if p is None else rng.standard_normal((p, r))
    return ProductPoint(rand_spd(rng, r, cond), rng.standard_normal((r, m)), C_r)


def rand_tangent(rng, pt):
    zeta = None if pt.C_r is None else rng.standard_normal(pt.C_r.shape)
    return ProductTangent(rand_sym(rng, pt.r), rng.standard_normal(pt.B_r.shape), zeta)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
