"""Model reduction of ``x' = -Ax + Bu, y = Cx`` (``A`` symmetric positive
definite) that keeps the reduced ``A_r`` symmetric positive definite.

The reduced triple is found by a Riemannian trust-region method on
``Sym+(r) x R^{r x m} x R^{p x r}`` minimizing the squared H2 error.
Balanced truncation and a projection-based (Stiefel) descent are provided
for comparison.
"""

from .baselines import ReductionReport, balanced_truncation, compare_methods, stiefel_descent
from .lti import GradientSystem, LtiSystem, ReducedSystem, h2_error, h2_norm
from .manifold import ProductPoint, ProductTangent
from .optimizer import TrustRegionConfig, trust_region_minimize

__version__ = "0.1.0"

__all__ = [
    "LtiSystem",
    "GradientSystem",
    "ReducedSystem",
    "ProductPoint",
    "ProductTangent",
    "TrustRegionConfig",
    "ReductionReport",
    "trust_region_minimize",
    "balanced_truncation",
    "stiefel_descent",
    "compare_methods",
    "h2_error",
    "h2_norm",
]
