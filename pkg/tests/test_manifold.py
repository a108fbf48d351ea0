import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _support import rand_point, rand_spd, rand_sym, rand_tangent
from spdmor import manifold as mf
from spdmor.manifold import ProductPoint, ProductTangent
from spdmor.matlib import NotPositiveDefinite, spd_sqrt, sym, sym_exp

seeds = st.integers(0, 2**32 - 1)


# --- Sym+(r) ---------------------------------------------------------------


def test_spd_inner_examples():
    assert mf.spd_inner(np.eye(2), np.eye(2), np.eye(2)) == 2.0
    assert mf.spd_inner([[2.0]], [[2.0]], [[2.0]]) == pytest.approx(1.0)
    assert mf.spd_norm(np.eye(3), np.zeros((3, 3))) == 0.0


def test_spd_inner_rejects_bad_point():
    with pytest.raises(NotPositiveDefinite):
        mf.spd_inner(np.diag([1.0, -1.0]), np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        mf.spd_inner(np.eye(2), np.eye(3), np.eye(3))


@given(seeds, st.integers(1, 8))
def test_spd_inner_affine_invariant(seed, r):
    rng = np.random.default_rng(seed)
    S = rand_spd(rng, r, 50.0)
    x1, x2 = rand_sym(rng, r), rand_sym(rng, r)
    g = rng.standard_normal((r, r)) + 3.0 * np.eye(r)
    lhs = mf.spd_inner(sym(g @ S @ g.T), sym(g @ x1 @ g.T), sym(g @ x2 @ g.T))
    rhs = mf.spd_inner(S, x1, x2)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10 * mf.spd_norm(S, x1) * mf.spd_norm(S, x2))


@given(seeds, st.integers(1, 8))
def test_spd_inner_symmetric_positive(seed, r):
    rng = np.random.default_rng(seed)
    S = rand_spd(rng, r, 20.0)
    x1, x2 = rand_sym(rng, r), rand_sym(rng, r)
    assert mf.spd_inner(S, x1, x2) == pytest.approx(mf.spd_inner(S, x2, x1), rel=1e-13)
    assert mf.spd_inner(S, x1, x1) > 0


def test_spd_exp_examples():
    S = rand_spd(np.random.default_rng(0), 3)
    np.testing.assert_allclose(mf.spd_exp(S, np.zeros((3, 3))), S, rtol=1e-13)
    xi = rand_sym(np.random.default_rng(1), 3)
    np.testing.assert_allclose(mf.spd_exp(np.eye(3), xi), sym_exp(xi), rtol=1e-13)
    out = mf.spd_exp([[1.0]], [[-50.0]])
    assert out[0, 0] == pytest.approx(math.exp(-50.0)) and out[0, 0] > 0


@given(seeds, st.integers(1, 6), st.floats(-2.0, 2.0))
def test_spd_exp_semigroup(seed, r, s):
    # Gamma(1) = Exp_{Gamma(s)}(Gamma'(s) (1 - s))
    rng = np.random.default_rng(seed)
    S = rand_spd(rng, r, 10.0)
    xi = rand_sym(rng, r)
    R = spd_sqrt(S)
    Ri = np.linalg.inv(R)
    M = sym(Ri @ xi @ Ri)
    mid = mf.spd_exp(S, s * xi)
    vel = sym(R @ M @ sym_exp(s * M) @ R)
    end = mf.spd_exp(mid, (1.0 - s) * vel)
    ref = mf.spd_exp(S, xi)
    assert np.linalg.norm(end - ref) <= 1e-9 * np.linalg.norm(ref)


@given(seeds, st.integers(1, 8), st.floats(-12.0, 12.0))
def test_spd_exp_stays_spd(seed, r, log_scale):
    # completeness where the result is representable: cond(S) <= 10 and
    # ||S^-1/2 xi S^-1/2||_2 <= 12 keep cond(result) below ~1e12
    rng = np.random.default_rng(seed)
    S = rand_spd(rng, r, 10.0, scale=math.exp(log_scale))
    R = spd_sqrt(S)
    M = rand_sym(rng, r)
    M *= rng.uniform(0, 12) / max(np.linalg.norm(M, 2), 1e-300)
    out = mf.spd_exp(S, sym(R @ M @ R))
    assert np.linalg.eigvalsh(out)[0] > 0


def test_spd_exp_overflow_is_reported():
    with pytest.raises(OverflowError):
        mf.spd_exp(np.eye(2), np.diag([1000.0, -1.0]))


def test_spd_exp_round_off_loss_is_reported():
    # cond(result) = e^40 is far beyond 1/eps, so lambda_min is pure noise
    Q = np.array([[0.6, 0.8], [-0.8, 0.6]])
    with pytest.raises(NotPositiveDefinite):
        mf.spd_exp(np.eye(2), Q @ np.diag([20.0, -20.0]) @ Q.T)


def test_flat_exp_leaves_the_cone():
    S = np.diag([1.0, 2.0])
    xi = np.diag([-3.0, 0.0])
    assert np.linalg.eigvalsh(mf.flat_exp(S, xi))[0] < 0
    assert np.linalg.eigvalsh(mf.spd_exp(S, xi))[0] > 0


def test_grad_conversion_examples():
    G = rand_sym(np.random.default_rng(0), 3)
    np.testing.assert_allclose(mf.spd_grad_from_euclidean(np.eye(3), G), G)
    assert mf.spd_grad_from_euclidean([[2.0]], [[3.0]])[0, 0] == 12.0
    with pytest.raises(ValueError):
        mf.spd_grad_from_euclidean(np.eye(2), np.ones((3, 3)))


def test_grad_conversion_defining_property():
    rng = np.random.default_rng(11)
    S = rand_spd(rng, 4, 30.0)
    G = rng.standard_normal((4, 4))
    grad = mf.spd_grad_from_euclidean(S, G)
    for _ in range(100):
        xi = rand_sym(rng, 4)
        assert mf.spd_inner(S, grad, xi) == pytest.approx(np.trace(xi.T @ sym(G)), rel=1e-11, abs=1e-12)


def test_hess_conversion_examples():
    S = rand_spd(np.random.default_rng(0), 3)
    zero = np.zeros((3, 3))
    np.testing.assert_allclose(mf.spd_hess_from_euclidean(S, np.eye(3), zero, zero), zero)
    # f = tr(S): gradient I, derivative 0
    assert mf.spd_hess_from_euclidean([[2.0]], [[1.0]], [[0.0]], [[1.0]])[0, 0] == 2.0


# smooth test functions: value, Euclidean gradient, its directional derivative
T_FIX = np.diag([1.0, 2.0, 0.5])
TEST_FUNCTIONS = {
    "trace": (np.trace, lambda S: np.eye(len(S)), lambda S, xi: np.zeros_like(S)),
    "logdet": (
        lambda S: np.linalg.slogdet(S)[1],
        lambda S: np.linalg.inv(S),
        lambda S, xi: -np.linalg.inv(S) @ xi @ np.linalg.inv(S),
    ),
    "quadratic": (
        lambda S: 0.5 * np.sum((S - T_FIX) ** 2),
        lambda S: S - T_FIX,
        lambda S, xi: xi,
    ),
}


@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_gradient_finite_difference(name):
    f, grad_e, _ = TEST_FUNCTIONS[name]
    rng = np.random.default_rng(2)
    for _ in range(20):
        S = rand_spd(rng, 3, 5.0)
        xi = rand_sym(rng, 3)
        h = 1e-6
        fd = (f(mf.spd_exp(S, h * xi)) - f(S)) / h
        exact = mf.spd_inner(S, mf.spd_grad_from_euclidean(S, grad_e(S)), xi)
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-6 * mf.spd_norm(S, xi))


@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_hessian_second_difference(name):
    f, grad_e, dgrad = TEST_FUNCTIONS[name]
    rng = np.random.default_rng(3)
    for _ in range(20):
        S = rand_spd(rng, 3, 5.0)
        xi = rand_sym(rng, 3)
        h = 1e-4
        second = (f(mf.spd_exp(S, h * xi)) - 2 * f(S) + f(mf.spd_exp(S, -h * xi))) / h**2
        H = mf.spd_hess_from_euclidean(S, grad_e(S), dgrad(S, xi), xi)
        exact = mf.spd_inner(S, H, xi)
        # logdet is affine along geodesics: both sides vanish
        assert second == pytest.approx(exact, rel=1e-4, abs=1e-5 * mf.spd_inner(S, xi, xi))


@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_hessian_self_adjoint(name):
    _, grad_e, dgrad = TEST_FUNCTIONS[name]
    rng = np.random.default_rng(4)
    for _ in range(50):
        S = rand_spd(rng, 3, 20.0)
        xi, eta = rand_sym(rng, 3), rand_sym(rng, 3)
        Hxi = mf.spd_hess_from_euclidean(S, grad_e(S), dgrad(S, xi), xi)
        Heta = mf.spd_hess_from_euclidean(S, grad_e(S), dgrad(S, eta), eta)
        defect = abs(mf.spd_inner(S, Hxi, eta) - mf.spd_inner(S, xi, Heta))
        assert defect <= 1e-8 * mf.spd_norm(S, xi) * mf.spd_norm(S, eta)


# --- product manifold ------------------------------------------------------


def test_product_inner_examples():
    rng = np.random.default_rng(0)
    pt = rand_point(rng, 3, 2, 2)
    t = rand_tangent(rng, pt)
    assert pt.inner(t, pt.zero_tangent()) == 0.0
    eye = ProductPoint(np.eye(3), pt.B_r, pt.C_r)
    s = rand_tangent(rng, eye)
    expected = sum(float(np.vdot(a, b)) for a, b in zip(t.components(), s.components()))
    assert eye.inner(t, s) == pytest.approx(expected, rel=1e-13)


@given(seeds, st.integers(1, 5), st.integers(1, 3), st.sampled_from([None, 1, 2]))
def test_product_inner_componentwise(seed, r, m, p):
    rng = np.random.default_rng(seed)
    pt = rand_point(rng, r, m, p)
    t1, t2 = rand_tangent(rng, pt), rand_tangent(rng, pt)
    expected = mf.spd_inner(pt.A_r, t1.xi, t2.xi) + float(np.vdot(t1.eta, t2.eta))
    if p is not None:
        expected += float(np.vdot(t1.zeta, t2.zeta))
    assert pt.inner(t1, t2) == pytest.approx(expected, rel=1e-12, abs=1e-13)
    assert pt.norm(t1) == pytest.approx(math.sqrt(pt.inner(t1, t1)), rel=1e-14)


def test_product_norm_examples():
    pt = ProductPoint(np.eye(2), np.ones((2, 1)), np.ones((1, 2)))
    assert pt.norm(pt.zero_tangent()) == 0.0
    t = ProductTangent(np.eye(2) / math.sqrt(2), [[1.0], [0.0]], [[0.0, 1.0]])
    assert pt.norm(t) == pytest.approx(math.sqrt(3))


def test_product_exp_examples():
    rng = np.random.default_rng(5)
    pt = rand_point(rng, 3, 2, 2)
    same = pt.exp(pt.zero_tangent())
    np.testing.assert_allclose(same.A_r, pt.A_r, rtol=1e-13)
    np.testing.assert_array_equal(same.B_r, pt.B_r)
    t = rand_tangent(rng, pt)
    new = pt.exp(t)
    np.testing.assert_array_equal(new.B_r, pt.B_r + t.eta)
    np.testing.assert_array_equal(new.C_r, pt.C_r + t.zeta)
    np.testing.assert_allclose(new.A_r, mf.spd_exp(pt.A_r, t.xi), rtol=1e-13)


def test_product_exp_homogeneity():
    # Gamma_{(x, a xi)}(t) = Gamma_{(x, xi)}(a t): two half steps along the
    # geodesic reach the same point as one full step
    rng = np.random.default_rng(6)
    pt = rand_point(rng, 3, 1, 1)
    t = rand_tangent(rng, pt)
    R = spd_sqrt(pt.A_r)
    Ri = np.linalg.inv(R)
    M = sym(Ri @ t.xi @ Ri)
    half = pt.exp(0.5 * t)
    vel = ProductTangent(sym(R @ M @ sym_exp(0.5 * M) @ R), t.eta, t.zeta)
    twice = half.exp(0.5 * vel)
    full = pt.exp(t)
    np.testing.assert_allclose(twice.A_r, full.A_r, rtol=1e-10)
    np.testing.assert_allclose(twice.B_r, full.B_r, rtol=1e-13)


def test_gradient_manifold_has_no_zeta():
    pt = ProductPoint(np.eye(2), np.ones((2, 1)))
    assert not pt.has_output
    with pytest.raises(ValueError):
        pt.inner(ProductTangent(np.eye(2), np.ones((2, 1)), np.ones((1, 2))), pt.zero_tangent())
    assert mf.dimension(pt) == 3 + 2


def test_dimension():
    assert mf.dimension(ProductPoint(np.eye(3), np.ones((3, 2)), np.ones((4, 3)))) == 6 + 6 + 12


def test_point_validation_and_fingerprint():
    with pytest.raises(NotPositiveDefinite):
        ProductPoint(np.diag([1.0, 0.0]), np.ones((2, 1)))
    with pytest.raises(ValueError):
        ProductPoint(np.eye(2), np.ones((3, 1)))
    with pytest.raises(ValueError):
        ProductPoint(np.eye(2), np.ones((2, 1)), np.ones((1, 3)))
    a = ProductPoint(np.eye(2), np.ones((2, 1)), np.ones((1, 2)))
    b = ProductPoint(np.eye(2), np.ones((2, 1)), np.ones((1, 2)))
    c = ProductPoint(np.eye(2), np.ones((2, 1)), 2 * np.ones((1, 2)))
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
    with pytest.raises(ValueError):
        a.B_r[0, 0] = 3.0


def test_tangent_arithmetic_and_symmetrization():
    t = ProductTangent([[1.0, 2.0], [2.0 + 1e-12, 1.0]], [[1.0], [2.0]])
    assert np.array_equal(t.xi, t.xi.T)
    u = 2.0 * t - t
    np.testing.assert_allclose(u.xi, t.xi)
    np.testing.assert_allclose((-t).eta, -t.eta)
    np.testing.assert_allclose((t / 2).eta, t.eta / 2)
    with pytest.raises(ValueError):
        t + ProductTangent(np.eye(2), [[1.0], [2.0]], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        ProductTangent([[0.0, 1.0], [0.0, 0.0]], [[1.0], [1.0]])
