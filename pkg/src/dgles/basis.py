"""One-dimensional nodal Legendre bases on [-1, 1].

Both node families used by the solver live here: Legendre-Gauss (weak-form
DGSEM) and Legendre-Gauss-Lobatto (split-form DGSEM).  Tensor products are
formed by the consumers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "NodeKind",
    "BasisSet",
    "build_basis",
    "legendre",
    "lagrange_matrix",
    "barycentric_weights",
    "quadrature_exactness_degree",
    "sbp_residual",
]

N_MIN = 1
N_MAX = 12
_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


class NodeKind(enum.Enum):
    GAUSS = "Gauss"
    GAUSS_LOBATTO = "GaussLobatto"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ConfigurationError(f"unknown node kind {value!r}; expected Gauss or GaussLobatto")


def legendre(n, x):
    """Return ``(P_n(x), P_n'(x))`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x), np.zeros_like(x)
    if n == 1:
        return x.copy(), np.ones_like(x)
    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    for k in range(2, n + 1):
        p_next = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp_next = dp_prev + (2 * k - 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


def _newton(f, x0):
    x = np.array(x0, dtype=float)
    for _ in range(_NEWTON_MAXIT):
        val, der = f(x)
        delta = val / der
        x -= delta
        if np.max(np.abs(delta)) <= _NEWTON_TOL * max(1.0, np.max(np.abs(x))):
            break
    return x


def _gauss_nodes(n):
    # roots of P_{n+1}
    m = n + 1
    k = np.arange(m)
    x0 = -np.cos((2 * k + 1) * np.pi / (2 * m))
    x = _newton(lambda t: legendre(m, t), x0)
    _, dp = legendre(m, x)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    return x, w


def _lobatto_nodes(n):
    # endpoints plus roots of P_n' via q = P_{n+1} - P_{n-1} ~ (1 - x^2) P_n'
    if n == 1:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    k = np.arange(1, n)
    x0 = -np.cos(np.pi * k / n)

    def q(t):
        pa, dpa = legendre(n + 1, t)
        pb, dpb = legendre(n - 1, t)
        return pa - pb, dpa - dpb

    inner = _newton(q, x0)
    x = np.concatenate([[-1.0], inner, [1.0]])
    p, _ = legendre(n, x)
    w = 2.0 / (n * (n + 1) * p**2)
    return x, w


def _symmetrize(x, w):
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if len(x) % 2 == 1:
        x[len(x) // 2] = 0.0
    return x, w


def barycentric_weights(x):
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_matrix(nodes, points):
    """Matrix ``L`` with ``L[p, j] = l_j(points[p])``.

    Uses the barycentric formula; points that coincide with a node give the
    exact cardinal row.
    """
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    lam = barycentric_weights(nodes)
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = lam[None, :] / diff
        mat = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        mat[rows] = exact[rows].astype(float)
    return mat


def _diff_matrix(x):
    lam = barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Nodal Lagrange basis of order ``order`` on a Legendre node family.

    Attributes
    ----------
    nodes, weights
        Quadrature nodes (ascending) and weights.
    diff
        ``diff[i, j] = l_j'(x_i)``.
    left, right
        Lagrange values ``l_j(-1)`` and ``l_j(+1)``.
    """

    kind: NodeKind
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n(self):
        return self.order + 1

    @property
    def weak_diff(self):
        """``-W^{-1} D^T W``: the weak-form derivative operator."""
        w = self.weights
        return -(self.diff.T * w[None, :]) / w[:, None]

    def interpolation_matrix(self, points):
        return lagrange_matrix(self.nodes, points)

    def __repr__(self):
        return f"BasisSet(kind={self.kind.value}, order={self.order})"


def build_basis(kind, order):
    """Construct a :class:`BasisSet` for ``kind`` and polynomial ``order``."""
    kind = NodeKind.parse(kind)
    if not isinstance(order, (int, np.integer)) or not N_MIN <= order <= N_MAX:
        raise ConfigurationError(f"polynomial order must be an integer in [{N_MIN}, {N_MAX}], got {order!r}")
    order = int(order)
    if kind is NodeKind.GAUSS:
        x, w = _gauss_nodes(order)
    else:
        x, w = _lobatto_nodes(order)
    x, w = _symmetrize(x, w)
    bnd = lagrange_matrix(x, [-1.0, 1.0])
    return BasisSet(
        kind=kind,
        order=order,
        nodes=_freeze(x),
        weights=_freeze(w),
        diff=_freeze(_diff_matrix(x)),
        left=_freeze(bnd[0]),
        right=_freeze(bnd[1]),
    )


def quadrature_exactness_degree(basis, tol=1e-12):
    """Highest degree ``d`` such that all monomials ``x^k``, ``k <= d``, integrate exactly."""
    x, w = basis.nodes, basis.weights
    degree = -1
    for k in range(0, 2 * basis.order + 4):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        if abs(np.dot(w, x**k) - exact) > tol:
            break
        degree = k
    return degree


def sbp_residual(basis):
    """Max-norm of ``W D + D^T W - B`` with ``B = diag(-1, 0, ..., 0, 1)``."""
    q = basis.weights[:, None] * basis.diff
    b = np.zeros((basis.n, basis.n))
    b[0, 0], b[-1, -1] = -1.0, 1.0
    return float(np.max(np.abs(q + q.T - b)))


def apply_along_axis(matrix, array, axis):
    """Contract ``matrix[p, j]`` with ``array`` along ``axis`` (index ``j``)."""
    out = np.tensordot(matrix, array, axes=(1, axis))
    return np.moveaxis(out, 0, axis)
