import numpy as np
import pytest

from fractex.descriptors import DescriptorCurve
from fractex.errors import ConditioningError, UnderdeterminedError
from fractex.fda import (basis_matrix, cholesky_lower, evaluate_basis, fit_alpha,
                         gram_factor, make_basis, make_basis_for_samples, transform_beta)

from oracles import dense_normal_equation_fit


def random_basis(rng, max_count=100, max_order=6):
    order = int(rng.integers(1, max_order + 1))
    count = int(rng.integers(order, max_count + 1))
    lo = float(rng.uniform(-5, 5))
    hi = lo + float(rng.uniform(0.5, 10))
    return make_basis(order, count, (lo, hi))


def test_order1_basis_is_indicators():
    basis = make_basis(1, 3, (0.0, 3.0))
    assert np.allclose(evaluate_basis(basis, 0.5), [1, 0, 0])
    assert np.allclose(evaluate_basis(basis, 1.0), [0, 1, 0])
    assert np.allclose(evaluate_basis(basis, 2.5), [0, 0, 1])
    assert np.allclose(evaluate_basis(basis, 3.0), [0, 0, 1])  # closed right end


def test_partition_of_unity_random_bases(rng):
    for _ in range(20):
        basis = random_basis(rng)
        ts = rng.uniform(basis.domain[0], basis.domain[1], size=1000)
        sums = basis_matrix(basis, ts).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) <= 1e-12


def test_clamped_ends():
    basis = make_basis(4, 7, (0.0, 1.0))
    first = evaluate_basis(basis, 0.0)
    last = evaluate_basis(basis, 1.0)
    assert first[0] == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(first[1:], 0.0)
    assert last[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(last[:-1], 0.0)


def test_linear_hat_values():
    basis = make_basis(2, 2, (0.0, 1.0))
    assert np.allclose(evaluate_basis(basis, 0.25), [0.75, 0.25], atol=1e-15)


def test_bernstein_special_case():
    basis = make_basis(4, 4, (0.0, 1.0))
    for t in np.linspace(0, 1, 17):
        vals = evaluate_basis(basis, t)
        bern = [(1 - t) ** 3, 3 * t * (1 - t) ** 2, 3 * t ** 2 * (1 - t), t ** 3]
        assert np.allclose(vals, bern, atol=1e-12)


def test_at_most_order_nonzero(rng):
    basis = make_basis(4, 20, (0.0, 1.0))
    for t in rng.uniform(0, 1, size=50):
        assert (evaluate_basis(basis, t) > 0).sum() <= 4


def test_basis_validation():
    with pytest.raises(ValueError):
        make_basis(0, 3, (0.0, 1.0))
    with pytest.raises(ValueError):
        make_basis(4, 3, (0.0, 1.0))
    with pytest.raises(ValueError):
        make_basis(2, 4, (1.0, 1.0))


def test_evaluate_outside_domain():
    basis = make_basis(2, 3, (0.0, 1.0))
    with pytest.raises(ValueError):
        evaluate_basis(basis, 1.5)


def test_quantile_knot_basis_covers_irregular_grid():
    t = 0.5 * np.log(np.arange(1, 101, dtype=float))
    basis = make_basis_for_samples(4, 60, t)
    assert basis.count == 60
    assert basis.domain == (t.min(), t.max())
    # every basis function sees at least one sample
    assert np.all(basis_matrix(basis, t).sum(axis=0) > 0)


def test_fit_reproduces_polynomials(rng):
    t = np.sort(rng.uniform(0, 2, size=40))
    u = 2.0 - 1.3 * t + 0.7 * t ** 2 + 0.2 * t ** 3
    basis = make_basis(4, 10, (float(t.min()), float(t.max())))
    coef = fit_alpha(basis, DescriptorCurve(t=t, u=u))
    assert coef.fit_residual <= 1e-9


def test_fit_interpolates_square_system():
    t = np.linspace(0.0, 1.0, 6)
    u = np.sin(3 * t)
    basis = make_basis(3, 6, (0.0, 1.0))
    coef = fit_alpha(basis, DescriptorCurve(t=t, u=u))
    assert coef.fit_residual <= 1e-9


def test_fit_matches_dense_oracle(rng):
    for _ in range(10):
        order = int(rng.integers(2, 7))
        q = int(rng.integers(order, 15))
        t = np.sort(rng.uniform(0, 3, size=q + 25))
        u = np.sin(t) + 0.3 * t + rng.normal(0, 0.01, size=t.size)
        basis = make_basis(order, q, (float(t.min()), float(t.max())))
        coef = fit_alpha(basis, DescriptorCurve(t=t, u=u))
        oracle = dense_normal_equation_fit(basis_matrix(basis, t), u)
        assert np.max(np.abs(coef.alpha - oracle)) <= 1e-8


def test_fit_scale_equivariant(rng):
    t = np.sort(rng.uniform(0, 1, size=30))
    u = np.cos(4 * t)
    basis = make_basis(4, 8, (float(t.min()), float(t.max())))
    a = fit_alpha(basis, DescriptorCurve(t=t, u=u)).alpha
    b = fit_alpha(basis, DescriptorCurve(t=t, u=3.5 * u)).alpha
    assert np.allclose(b, 3.5 * a, atol=1e-10)


def test_fit_underdetermined():
    t = np.linspace(0, 1, 5)
    basis = make_basis(2, 6, (0.0, 1.0))
    with pytest.raises(UnderdeterminedError):
        fit_alpha(basis, DescriptorCurve(t=t, u=t))


def test_fit_empty_span_conditioning_error():
    # order-1 indicators: a span with no sample gives an exactly zero column
    t = np.array([0.1, 0.2, 0.3, 2.1, 2.5, 3.0, 3.5, 3.9])
    basis = make_basis(1, 4, (0.0, 4.0))
    with pytest.raises(ConditioningError, match=r"\[1, 2\)"):
        fit_alpha(basis, DescriptorCurve(t=t, u=np.ones_like(t)))


def test_gram_identity_for_unit_indicators():
    basis = make_basis(1, 2, (0.0, 2.0))
    gf = gram_factor(basis)
    assert np.allclose(gf.phi, np.eye(2), atol=1e-15)
    assert np.allclose(gf.s, np.eye(2), atol=1e-15)


def test_cholesky_hand_case():
    s = cholesky_lower(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(s, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-12)


def test_cholesky_rejects_indefinite():
    with pytest.raises(ConditioningError):
        cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gram_factor_random_bases(rng):
    for _ in range(10):
        basis = random_basis(rng, max_count=40)
        gf = gram_factor(basis)
        phi, s = gf.phi, gf.s
        assert np.allclose(phi, phi.T, atol=1e-14)
        tol = 1e-10 * np.abs(phi).max()
        assert np.max(np.abs(s @ s.T - phi)) <= tol
        k, l = np.meshgrid(np.arange(basis.count), np.arange(basis.count), indexing="ij")
        assert np.all(phi[np.abs(k - l) >= basis.order] == 0.0)


def test_gram_order2_hand_integral():
    # hat functions on (0,1): integral phi0^2 = 1/3, phi0 phi1 = 1/6
    gf = gram_factor(make_basis(2, 2, (0.0, 1.0)))
    assert np.allclose(gf.phi, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-14)


def test_transform_beta_zero_and_identity():
    basis = make_basis(1, 3, (0.0, 3.0))   # unit indicators: S = I
    gf = gram_factor(basis)
    t = np.array([0.2, 0.8, 1.5, 2.2, 2.8])
    coef = fit_alpha(basis, DescriptorCurve(t=t, u=np.zeros_like(t)))
    out = transform_beta(coef, gf)
    assert np.allclose(out.beta, 0.0)
    coef2 = fit_alpha(basis, DescriptorCurve(t=t, u=np.array([1.0, 2.0, 3.0, 3.0, 4.0])))
    out2 = transform_beta(coef2, gf)
    assert np.allclose(out2.beta, coef2.alpha)
    assert np.array_equal(out2.alpha, coef2.alpha)   # alpha retained


def test_transform_beta_conventions(rng):
    t = np.sort(rng.uniform(0, 2, size=40))
    u = np.sin(2 * t) + t
    basis = make_basis(4, 9, (float(t.min()), float(t.max())))
    gf = gram_factor(basis)
    coef = fit_alpha(basis, DescriptorCurve(t=t, u=u))
    alpha = coef.alpha
    beta_s = transform_beta(coef, gf, convention="s").beta
    beta_st = transform_beta(coef, gf, convention="st").beta
    norm_sq_expected = alpha @ gf.phi @ alpha        # L2 norm^2 of the fitted function
    assert np.sum(beta_st ** 2) == pytest.approx(norm_sq_expected, rel=1e-9)
    # the printed convention beta = S alpha does NOT satisfy that identity
    assert abs(np.sum(beta_s ** 2) - norm_sq_expected) > 1e-6 * abs(norm_sq_expected)
    with pytest.raises(ValueError):
        transform_beta(coef, gf, convention="x")


def test_transform_beta_linear(rng):
    t = np.sort(rng.uniform(0, 1, size=30))
    basis = make_basis(3, 7, (float(t.min()), float(t.max())))
    gf = gram_factor(basis)
    u = np.sin(5 * t)
    v = np.cos(2 * t)
    bu = transform_beta(fit_alpha(basis, DescriptorCurve(t=t, u=u)), gf).beta
    bv = transform_beta(fit_alpha(basis, DescriptorCurve(t=t, u=v)), gf).beta
    buv = transform_beta(fit_alpha(basis, DescriptorCurve(t=t, u=u + v)), gf).beta
    assert np.allclose(buv, bu + bv, atol=1e-10)


def test_transform_beta_basis_mismatch():
    t = np.linspace(0, 1, 20)
    basis_a = make_basis(3, 6, (0.0, 1.0))
    basis_b = make_basis(3, 7, (0.0, 1.0))
    coef = fit_alpha(basis_a, DescriptorCurve(t=t, u=t))
    with pytest.raises(ValueError, match="different basis"):
        transform_beta(coef, gram_factor(basis_b))


def test_fit_deterministic(rng):
    t = np.sort(rng.uniform(0, 2, size=50))
    u = np.sin(3 * t)
    basis = make_basis(4, 12, (float(t.min()), float(t.max())))
    a = fit_alpha(basis, DescriptorCurve(t=t, u=u)).alpha
    b = fit_alpha(basis, DescriptorCurve(t=t, u=u)).alpha
    assert np.array_equal(a, b)
