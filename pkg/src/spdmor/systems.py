"""Benchmark systems: two small published examples and a seeded random family."""

from __future__ import annotations

import numpy as np

from .lti import GradientSystem, LtiSystem

__all__ = [
    "two_state_system",
    "five_state_system",
    "FIVE_STATE_U",
    "FIVE_STATE_BT_A",
    "FIVE_STATE_TR",
    "random_system",
]


def two_state_system() -> LtiSystem:
    """``A = diag(2, 1)``, ``B = (-1, 1)^T``, ``C = (1, 1)``; reduce to ``r = 1``."""
    return LtiSystem(np.diag([2.0, 1.0]), [[-1.0], [1.0]], [[1.0, 1.0]])


_A5 = [
    [3, -1, 1, 1, -1],
    [-1, 2, 0, 0, 2],
    [1, 0, 2, 1, 1],
    [1, 0, 1, 3, 0],
    [-1, 2, 1, 0, 4],
]
_B5 = [[0, 1], [1, 0], [-1, 1], [1, 0], [0, 1]]
_C5 = [[1, 0, 0, 0, 0], [0, 0, 1, 0, 1]]


def five_state_system() -> LtiSystem:
    """Five states, two inputs, two outputs; reduce to ``r = 3``."""
    return LtiSystem(np.array(_A5, float), np.array(_B5, float), np.array(_C5, float))


# Projection basis published for the five-state example, 4 decimals, so only
# orthonormal to about 1.5e-4.
FIVE_STATE_U = np.array(
    [
        [0.8906, 0.1189, -0.1025],
        [-0.1117, 0.7216, 0.0373],
        [-0.0650, -0.1558, 0.8994],
        [-0.2144, 0.6138, 0.0302],
        [0.3798, 0.2532, 0.4223],
    ]
)
FIVE_STATE_U.setflags(write=False)

# Published balanced-truncation state matrix (one realization among many).
FIVE_STATE_BT_A = np.array(
    [
        [2.8944, -0.0422, -1.4729],
        [-0.0318, 1.0470, -0.2615],
        [-1.1764, -0.2355, 4.1898],
    ]
)
FIVE_STATE_BT_A.setflags(write=False)

# Published trust-region result, 4 decimals.
FIVE_STATE_TR = {
    "A_r": np.array([[1.8965, 0.0237, 0.7778], [0.0237, 3.1554, 1.8009], [0.7778, 1.8009, 3.1784]]),
    "B_r": np.array([[-0.2677, 1.1820], [1.5124, 0.2049], [-0.7759, 1.2155]]),
    "C_r": np.array([[0.8726, 0.1503, -0.0630], [0.3321, 0.0680, 1.3121]]),
}


def random_system(n: int, m: int, p: int, seed: int, gradient: bool = False):
    """Seeded random SPD system.

    ``A = n (G G^T + n I) / ||G G^T + n I||_2`` with ``G`` standard normal,
    so the spectrum of ``A`` lies in ``[n / 5, n]`` roughly and
    ``||A||_2 = n``.  ``B`` (n x m) and ``C`` (p x n) are standard normal.
    With ``gradient=True`` a :class:`GradientSystem` is returned (``p`` is
    ignored and ``C = B^T``).

    This recipe is a convention of this package, not a published model.
    """
    if min(n, m, p) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    M = G @ G.T + n * np.eye(n)
    A = n * M / np.linalg.norm(M, 2)
    A = 0.5 * (A + A.T)
    B = rng.standard_normal((n, m))
    if gradient:
        return GradientSystem(A, B)
    C = rng.standard_normal((p, n))
    return LtiSystem(A, B, C)
