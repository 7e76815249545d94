import numpy as np
import pytest

from dgles.basis import (
    NodeKind,
    apply_along_axis,
    build_basis,
    lagrange_matrix,
    quadrature_exactness_degree,
    sbp_residual,
)
from dgles.errors import ConfigurationError


def test_linear_lobatto():
    b = build_basis(NodeKind.GAUSS_LOBATTO, 1)
    np.testing.assert_allclose(b.nodes, [-1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(b.weights, [1.0, 1.0], atol=1e-15)


def test_quadratic_lobatto():
    b = build_basis("GaussLobatto", 2)
    np.testing.assert_allclose(b.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(b.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)


def test_linear_gauss():
    b = build_basis(NodeKind.GAUSS, 1)
    r = 1.0 / np.sqrt(3.0)
    np.testing.assert_allclose(b.nodes, [-r, r], atol=1e-15)
    np.testing.assert_allclose(b.weights, [1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("order", [0, 13, 2.5])
def test_order_out_of_range(order):
    with pytest.raises(ConfigurationError):
        build_basis(NodeKind.GAUSS, order)


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        build_basis("Chebyshev", 3)


@pytest.mark.parametrize(
    "kind,order,degree",
    [(NodeKind.GAUSS, 4, 9), (NodeKind.GAUSS_LOBATTO, 4, 7), (NodeKind.GAUSS, 1, 3)],
)
def test_exactness_degree(kind, order, degree):
    assert quadrature_exactness_degree(build_basis(kind, order)) == degree


@pytest.mark.parametrize("order", range(1, 13))
def test_nodes_match_numpy_gauss(order):
    x, w = np.polynomial.legendre.leggauss(order + 1)
    b = build_basis(NodeKind.GAUSS, order)
    np.testing.assert_allclose(b.nodes, x, atol=1e-14)
    np.testing.assert_allclose(b.weights, w, atol=1e-14)


@pytest.mark.parametrize("order", range(2, 13))
def test_lobatto_interior_nodes_are_legendre_derivative_roots(order):
    b = build_basis(NodeKind.GAUSS_LOBATTO, order)
    dp = np.polynomial.legendre.Legendre.basis(order).deriv()
    np.testing.assert_allclose(np.sort(dp.roots()), b.nodes[1:-1], atol=1e-13)
    assert abs(b.weights.sum() - 2.0) < 1e-14


def test_sbp_examples():
    assert sbp_residual(build_basis(NodeKind.GAUSS_LOBATTO, 4)) <= 1e-12
    assert sbp_residual(build_basis(NodeKind.GAUSS_LOBATTO, 2)) <= 1e-13
    assert sbp_residual(build_basis(NodeKind.GAUSS, 4)) > 0.1


@pytest.mark.parametrize("kind", list(NodeKind))
def test_differentiation_exact_for_degree_n(kind):
    b = build_basis(kind, 5)
    coeffs = np.arange(1.0, 7.0)
    p = np.polynomial.Polynomial(coeffs)
    np.testing.assert_allclose(b.diff @ p(b.nodes), p.deriv()(b.nodes), atol=1e-11)
    # rows of D annihilate constants
    np.testing.assert_allclose(b.diff.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("kind", list(NodeKind))
def test_boundary_interpolation(kind):
    b = build_basis(kind, 4)
    f = b.nodes**3 - 2 * b.nodes
    assert abs(b.left @ f - 1.0) < 1e-13
    assert abs(b.right @ f + 1.0) < 1e-13


def test_lagrange_matrix_at_nodes_is_identity():
    b = build_basis(NodeKind.GAUSS, 6)
    np.testing.assert_allclose(lagrange_matrix(b.nodes, b.nodes), np.eye(7), atol=1e-15)


def test_weak_diff_definition():
    b = build_basis(NodeKind.GAUSS, 3)
    w = np.diag(b.weights)
    np.testing.assert_allclose(b.weak_diff, -np.linalg.inv(w) @ b.diff.T @ w, atol=1e-13)


def test_apply_along_axis_matches_einsum():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 4))
    a = rng.standard_normal((2, 4, 4, 4, 5))
    np.testing.assert_allclose(apply_along_axis(m, a, 2), np.einsum("pj,eijkc->eipkc", m, a), atol=1e-13)


def test_basis_arrays_are_read_only():
    b = build_basis(NodeKind.GAUSS, 2)
    with pytest.raises(ValueError):
        b.nodes[0] = 0.0
