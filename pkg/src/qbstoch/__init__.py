"""Numerical laboratory for Gaussian sums, γ-norms and stochastic integrals in
r-Banach spaces, with a spectral stochastic heat equation simulator."""

__version__ = "0.1.0"
