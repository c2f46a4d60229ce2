"""Adapted integrands whose coefficients flip with past Brownian signs.

Integrates a family of such processes against the driving noise and against
an independent copy, then checks the stopped-integral identity.

Run with ``python3 demos/adapted_integrals.py``.
"""

from qbstoch.adapted import (FirstHittingRule, NoiseRecord, check_decoupling, sign_rule_family,
                             stopped_integral)
from qbstoch.qspace import ell
from qbstoch.wiener import dyadic_grid

space = ell(0.5, 4)
family = sign_rule_family(space, size=4, seed=3)
for p in (1.0, 2.0):
    rec = check_decoupling(family, p, count=5000, seed=0, level=3)
    ratios = ", ".join(f"{row['ratio']:.3f}" for row in rec.details["rows"])
    print(f"p={p:g}: sup-coupled / decoupled ratios {ratios}; constant {rec.bound:.3f} [{rec.verdict}]")

phi = family[0]
noise = NoiseRecord.draw(1, dyadic_grid(phi.partition, 3), phi.K, 1000)
rec = stopped_integral(phi, noise, FirstHittingRule(1.0))
print(f"stopping at the first exit of the unit ball: max pathwise error {rec.estimate:.2g}, "
      f"mean stop index {rec.details['mean_stop_index']:.2f}")
