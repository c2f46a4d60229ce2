"""γ-norms of finite-rank operators into l^s spaces.

Shows the sandwich between the stored orthonormal system and the sampled
supremum, and the matrix contraction that fails once the constant is
forced to 1.

Run with ``python3 demos/gamma_norms.py``.
"""

import numpy as np

from qbstoch.gammaop import check_gamma_sandwich, check_matrix_contraction, random_operator
from qbstoch.qspace import ell

for s in (0.5, 1.0, 2.0):
    R = random_operator(ell(s, 4), 3, 5, seed=1)
    rec = check_gamma_sandwich(R, 1.0, ons_trials=16, count=20000, seed=2)
    d = rec.details
    # for r = 1 both ends coincide, so the sampled sup may overshoot by Monte Carlo error
    print(f"l^{s:g}_4: basis {d['basis']:.4f} <= sup {d['sup']:.4f} <= {d['upper']:.4f}"
          f"  (ratio se {rec.std_error:.4f}) [{rec.verdict}]")

space = ell(0.5, 2)
vectors = [np.array([1.0, 1.0]) / 4, np.array([1.0, -1.0]) / 16]
A = np.array([[1.0, 0.0]])      # keep only the first Gaussian: a norm-one projection
for constant in (None, 1.0):
    rec = check_matrix_contraction(A, vectors, 2.0, 1, 0, space, constant=constant, method="quadrature")
    print(f"contraction by a projection, constant {rec.bound:g}: ratio {rec.estimate:.5f} [{rec.verdict}]")
