"""Random sums in the quasi-Banach space l^{1/2}_2.

Walks through the two-vector example: the Gaussian second moments by
quadrature, the Rademacher moments by enumeration, and the symmetrization
constant 2^((1 - r^p)/(r^p)) being attained.

Run with ``python3 demos/quasi_banach_sums.py``.
"""

import numpy as np

from qbstoch.qspace import ell, rnorm, symmetrization_constant
from qbstoch.randsum import RandomSum, check_symmetrization, quadrature_expectation_2d, rademacher_enumerate

space = ell(0.5, 2)
x = np.array([1.0, 1.0]) / 4
y = np.array([1.0, -1.0]) / 16
print(f"space {space.label()}: r = {space.r}, ||x|| = {rnorm(space, x):.4f}, ||y|| = {rnorm(space, y):.4f}")

# E||gamma_1 x||^2 and E||gamma_1 x + gamma_2 y||^2 by 96-node Gauss-Hermite
only_x = quadrature_expectation_2d(x, np.zeros(2), 2.0, space=space)
both = quadrature_expectation_2d(x, y, 2.0, space=space)
print(f"E||X||^2 = {only_x:.7f}   E||X+Y||^2 = {both:.5f}   (adding Y lowers the moment)")

# in l^{1/2} the r-triangle inequality lets a sum be smaller than its terms:
# eps1 (1,1) + eps2 (1,-1) always has one zero coordinate
u, v = np.array([1.0, 1.0]), np.array([1.0, -1.0])
for p in (1.0, 2.0, 4.0):
    single = rademacher_enumerate([u], p, space)
    pair = rademacher_enumerate([u, v], p, space)
    X = RandomSum(space, [u], "rademacher", "x")
    Y = RandomSum(space, [v], "rademacher", "y")
    rec = check_symmetrization(X, Y, p, 1, 0)
    print(f"p={p:g}: E||eps u||^p = {single:g} = 2^(p/r), E||eps1 u + eps2 v||^p = {pair:g} = 2^p, "
          f"ratio {rec.estimate:g} vs constant {symmetrization_constant(space.r, p):g}")
