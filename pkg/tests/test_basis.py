import numpy as np
import pytest

from semax.basis import build_basis, legendre


def test_legendre_low_orders():
    assert legendre(0, 0.3) == (1.0, 0.0)
    for x in (-1.0, -0.25, 0.0, 0.7, 1.0):
        val, der = legendre(1, x)
        assert val == x and der == 1.0
    val, der = legendre(2, 0.5)
    assert val == pytest.approx(-0.125, abs=1e-15)
    assert der == pytest.approx(1.5, abs=1e-15)


def test_legendre_rejects_bad_input():
    with pytest.raises(ValueError):
        legendre(-1, 0.0)
    with pytest.raises(ValueError):
        legendre(3, 1.5)


def test_two_point_rule():
    b = build_basis(1)
    assert b.points.tolist() == [-1.0, 1.0]
    assert b.weights.tolist() == [1.0, 1.0]


def test_three_point_rule():
    b = build_basis(2)
    np.testing.assert_allclose(b.points, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(b.weights, [1 / 3, 4 / 3, 1 / 3], rtol=1e-15)
    # exact integral of x^2 over [-1, 1]
    assert b.weights @ b.points**2 == pytest.approx(2 / 3, rel=1e-14)


def test_five_point_closed_form():
    b = build_basis(4)
    np.testing.assert_allclose(b.points[3], np.sqrt(3 / 7), rtol=1e-14)
    np.testing.assert_allclose(b.weights, [1 / 10, 49 / 90, 32 / 45,
                                           49 / 90, 1 / 10], rtol=1e-13)


@pytest.mark.parametrize("degree", range(1, 16))
def test_invariants(degree):
    b = build_basis(degree)
    n = degree
    assert b.points[0] == -1.0 and b.points[-1] == 1.0
    assert np.all(np.diff(b.points) > 0)
    np.testing.assert_allclose(b.points, -b.points[::-1], atol=1e-15)
    assert np.all(b.weights > 0)
    assert b.weights.sum() == pytest.approx(2.0, rel=1e-13)
    # derivative matrix: zero row sums, antisymmetry under index reversal,
    # closed-form corners
    assert np.abs(b.deriv.sum(axis=1)).max() < 1e-11
    np.testing.assert_allclose(b.deriv, -b.deriv[::-1, ::-1], atol=1e-10)
    assert b.deriv[0, 0] == -n * (n + 1) / 4
    assert b.deriv[n, n] == n * (n + 1) / 4
    assert np.array_equal(b.deriv_t, b.deriv.T)


@pytest.mark.parametrize("degree", range(1, 16))
def test_derivative_exact_on_polynomials(degree):
    b = build_basis(degree)
    for k in range(degree + 1):
        want = k * b.points ** (k - 1) if k else np.zeros_like(b.points)
        got = b.deriv @ b.points**k
        assert np.abs(got - want).max() < 1e-11 * max(1.0, np.abs(want).max())


@pytest.mark.parametrize("degree", range(1, 16))
def test_quadrature_exactness(degree):
    b = build_basis(degree)
    for k in range(2 * degree):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert b.weights @ b.points**k == pytest.approx(exact, abs=1e-11)


def test_degree_30_still_converges():
    b = build_basis(30)
    assert b.weights.sum() == pytest.approx(2.0, rel=1e-12)
    x = b.points
    assert np.abs(b.deriv @ x**5 - 5 * x**4).max() < 1e-9


def test_degree_bounds():
    with pytest.raises(ValueError):
        build_basis(0)
    with pytest.raises(ValueError):
        build_basis(32)


def test_basis_is_immutable():
    b = build_basis(3)
    with pytest.raises(ValueError):
        b.points[0] = 0.0
    with pytest.raises(ValueError):
        b.deriv[0, 0] = 0.0
