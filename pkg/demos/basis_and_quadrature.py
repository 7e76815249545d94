"""
Nodal bases on Gauss and Gauss-Lobatto points
=============================================

Both solver formulations sit on a tensor-product Lagrange basis.  The
explicit-LES path collocates on Gauss points, the implicit-LES path on
Gauss-Lobatto points, which include the element end points.
"""

import numpy as np

from dgles import NodeKind, build_basis
from dgles.basis import quadrature_exactness_degree, sbp_residual

# %%
# Node sets for a fourth-order element.  Lobatto nodes reach the faces, so
# face values need no interpolation.
for kind in (NodeKind.GAUSS, NodeKind.GAUSS_LOBATTO):
    b = build_basis(kind, 4)
    print(f"{kind.value:>14s} nodes   {np.array2string(b.nodes, precision=4)}")
    print(f"{'':>14s} weights {np.array2string(b.weights, precision=4)}")

# %%
# Quadrature strength.  Gauss points integrate polynomials of degree 2N+1,
# Lobatto points 2N-1.  The product of two degree-N polynomials is therefore
# integrated exactly only on Gauss points.
print("\n N  Gauss  Lobatto")
for n in range(1, 9):
    g = quadrature_exactness_degree(build_basis(NodeKind.GAUSS, n))
    l = quadrature_exactness_degree(build_basis(NodeKind.GAUSS_LOBATTO, n))
    print(f"{n:2d}  {g:5d}  {l:7d}")

# %%
# The summation-by-parts identity  M D + (M D)^T = B  holds on Lobatto
# nodes.  It is the discrete integration by parts that lets the split-form
# volume term conserve kinetic energy.
print("\nSBP residual on Lobatto nodes")
for n in range(1, 9):
    print(f"  N={n}: {sbp_residual(build_basis(NodeKind.GAUSS_LOBATTO, n)):.2e}")

# %%
# Differentiating a polynomial of degree N is exact on either node set.
b = build_basis(NodeKind.GAUSS, 5)
x = b.nodes
err = np.max(np.abs(b.diff @ x**5 - 5 * x**4))
print(f"\nd/dx x^5 on 6 Gauss points, max error {err:.1e}")
