"""Finite-rank operators ``H -> E`` and their γ-radonifying norms.

``H`` is truncated to ``R^M``.  An operator ``R = sum_n h_n (x) x_n`` is
stored as an orthonormal system ``h`` (rows of an ``N x M`` array) together
with the vectors ``x_n`` of an r-normed space ``E``.  Its γ^p-norm is the
supremum over finite orthonormal systems ``u`` of
``(E ||sum_m gamma_m R u_m||^p)^(1/p)``; it is approximated by sampling random
orthonormal systems and bracketed from below by the Gaussian sum over the
stored system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import rng
from .errors import StructuralError, ValidationError
from .qspace import RSpaceDescriptor, as_vectors, ell, rnorm, symmetrization_constant
from .randsum import MomentEstimate, batch_norms, moment_estimate
from .report import CheckRecord, verdict

__all__ = [
    "FiniteRankOperator", "GammaNormEstimate", "gamma_basis_norm", "gamma_sup_norm",
    "spectral_norm", "operator_quasi_norm", "check_matrix_contraction",
    "check_ideal_property", "check_gamma_sandwich", "square_function_norm",
    "besov_gamma_norm", "basis_test_partial_sums", "random_operator", "random_ons",
    "square_function_ratio", "check_square_function_hilbert", "check_square_function_bracket",
]

ONS_TOL = 1e-10
ONS_REPAIR_TOL = 1e-6
SLACK = 3.0


def _lowdin(ons: np.ndarray) -> np.ndarray:
    """Closest orthonormal rows (symmetric orthonormalization)."""
    u, _, vt = np.linalg.svd(ons, full_matrices=False)
    return u @ vt


def random_ons(g: np.random.Generator, M: int, size: int) -> np.ndarray:
    """``size`` orthonormal rows in ``R^M`` from a QR factorization of a Gaussian matrix."""
    q, r = np.linalg.qr(g.standard_normal((M, size)))
    return (q * np.sign(np.diag(r))).T


@dataclass(frozen=True)
class FiniteRankOperator:
    """``R = sum_n h_n (x) x_n`` with orthonormal ``h_n`` in ``R^M``.

    Parameters
    ----------
    ons : (N, M) array
        Orthonormal rows.  Small Gram drift (below 1e-6) is repaired by
        symmetric re-orthonormalization; larger drift is rejected.
    vectors : (N, *space.shape) array or list of RVector
    space : RSpaceDescriptor
    """

    ons: np.ndarray
    vectors: np.ndarray
    space: RSpaceDescriptor

    def __post_init__(self):
        ons = np.atleast_2d(np.asarray(self.ons, dtype=float))
        vectors = as_vectors(self.space, self.vectors)
        N, M = ons.shape
        if N > M:
            raise StructuralError(f"{N} orthonormal vectors cannot live in R^{M}")
        if vectors.shape[0] != N:
            raise StructuralError("need one vector per orthonormal system member")
        drift = np.abs(ons @ ons.T - np.eye(N)).max()
        if drift > ONS_REPAIR_TOL:
            raise ValidationError(f"system is not orthonormal (Gram error {drift:.2e})")
        if drift > ONS_TOL / 10:
            ons = _lowdin(ons)
        ons.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "ons", ons)
        object.__setattr__(self, "vectors", vectors)

    @property
    def rank(self) -> int:
        return self.ons.shape[0]

    @property
    def hilbert_dim(self) -> int:
        return self.ons.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """Coordinate matrix ``(E size) x M`` of the operator."""
        return self.vectors.reshape(self.rank, -1).T @ self.ons

    def apply(self, h) -> np.ndarray:
        """``R h`` for one vector or the rows of an array."""
        h = np.atleast_2d(h)
        return (h @ self.matrix.T).reshape((-1,) + self.space.shape)

    def compose(self, U=None, V=None, target: RSpaceDescriptor | None = None) -> "FiniteRankOperator":
        """``U R V`` on ``G = R^(V.shape[1])`` with values in ``target``."""
        T = self.matrix
        if V is not None:
            V = np.atleast_2d(V)
            if V.shape[0] != self.hilbert_dim:
                raise StructuralError("V does not map into the Hilbert space of R")
            T = T @ V
        if U is not None:
            U = np.atleast_2d(U)
            if U.shape[1] != T.shape[0]:
                raise StructuralError("U does not act on the space of R")
            T = U @ T
        target = target or (self.space if U is None or U.shape[0] == U.shape[1] else ell(2, U.shape[0]))
        if T.shape[0] != target.size:
            raise StructuralError("target space does not match U")
        G = T.shape[1]
        return FiniteRankOperator(np.eye(G), T.T.reshape((G,) + target.shape), target)

    def to_dict(self) -> dict:
        return {"ons": self.ons.tolist(), "vectors": self.vectors.tolist(),
                "space": self.space.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteRankOperator":
        return cls(np.array(data["ons"]), np.array(data["vectors"]),
                   RSpaceDescriptor.from_dict(data["space"]))


def random_operator(space: RSpaceDescriptor, rank: int, M: int, seed: int, *path,
                    scales=None) -> FiniteRankOperator:
    """A random operator with Gaussian vectors (optionally rescaled per member)."""
    g = rng.generator(seed, "operator", *path)
    ons = random_ons(g, M, rank)
    vecs = g.standard_normal((rank,) + space.shape)
    if scales is not None:
        vecs = vecs * np.asarray(scales, dtype=float).reshape((rank,) + (1,) * len(space.shape))
    return FiniteRankOperator(ons, vecs, space)


@dataclass(frozen=True)
class GammaNormEstimate:
    """Lower (stored system) and sampled-supremum estimates of the γ^p-norm."""

    p: float
    basis_value: float
    sup_value: float
    std_error: float
    basis_error: float = 0.0
    trials: int = 0

    @property
    def constant(self) -> float:
        return self.sup_value / self.basis_value if self.basis_value > 0 else 1.0


def _gaussians(seed, count, M, label="gamma"):
    return rng.normal(seed, ("gammaop", label), (count, M))


def _sum_moment(space, vectors_flat, gam, p) -> MomentEstimate:
    samples = (gam[:, :vectors_flat.shape[0]] @ vectors_flat).reshape((-1,) + space.shape)
    return moment_estimate(batch_norms(space, samples), p)


def gamma_basis_norm(R: FiniteRankOperator, p: float, count: int, seed: int) -> MomentEstimate:
    """``(E ||sum_n gamma_n x_n||^p)^(1/p)`` over the stored orthonormal system."""
    if count <= 0:
        raise ValidationError("count must be positive")
    gam = _gaussians(seed, count, R.rank)
    return _sum_moment(R.space, R.vectors.reshape(R.rank, -1), gam, p)


def gamma_sup_norm(R: FiniteRankOperator, p: float, ons_trials: int, count: int,
                   seed: int) -> GammaNormEstimate:
    """Largest Gaussian-sum norm over the stored and ``ons_trials`` random systems.

    Trial ``i`` uses a random orthonormal system of size ``1 + i mod M``; all
    trials share the same Gaussian draws.
    """
    if ons_trials < 1:
        raise ValidationError("ons_trials must be at least 1")
    M = R.hilbert_dim
    gam = _gaussians(seed, count, M)
    basis = _sum_moment(R.space, R.vectors.reshape(R.rank, -1), gam, p)
    best = basis
    g = rng.generator(seed, "gammaop", "ons")
    T = R.matrix
    for i in range(ons_trials):
        u = random_ons(g, M, 1 + i % M)
        est = _sum_moment(R.space, u @ T.T, gam, p)
        if est.value > best.value:
            best = est
    return GammaNormEstimate(p, basis.value, best.value, best.std_error, basis.std_error, ons_trials)


def check_gamma_sandwich(R: FiniteRankOperator, p: float, ons_trials: int, count: int, seed: int,
                         name: str = "gamma-norm sandwich") -> CheckRecord:
    """Stored-system Gaussian norm <= γ^p-norm <= 2^((1-r^p)/(r^p)) x stored-system norm."""
    est = gamma_sup_norm(R, p, ons_trials, count, seed)
    C = symmetrization_constant(R.space.r, p)
    rel = est.std_error / est.sup_value if est.sup_value > 0 else 0.0
    rel_b = est.basis_error / est.basis_value if est.basis_value > 0 else 0.0
    ok = (est.basis_value <= est.sup_value * (1 + SLACK * rel) + 1e-15
          and est.sup_value <= C * est.basis_value * (1 + SLACK * math.hypot(rel, rel_b)) + 1e-15)
    return CheckRecord(
        name=name, anchor="finite-rank γ-norm sandwich between orthonormal systems",
        estimate=est.constant, bound=C, verdict=verdict(ok), std_error=est.constant * math.hypot(rel, rel_b),
        details={"p": p, "r": R.space.r, "basis": est.basis_value, "sup": est.sup_value,
                 "lower": est.basis_value, "upper": C * est.basis_value, "trials": ons_trials},
    )


def spectral_norm(A, iters: int = 1000, tol: float = 1e-14) -> float:
    """``||A||_{l^2 -> l^2}`` by power iteration on ``A^T A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        return 0.0
    v = np.ones(A.shape[1]) + np.linspace(0, 1, A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            # start was in the kernel; restart on the largest column
            v = np.zeros(A.shape[1])
            v[np.argmax(np.linalg.norm(A, axis=0))] = 1.0
            continue
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)


def operator_quasi_norm(U, source: RSpaceDescriptor, target: RSpaceDescriptor,
                        restarts: int = 20, seed: int = 0) -> float:
    """``sup ||U x||_target / ||x||_source`` by multi-start local maximization.

    Starts are the coordinate vectors plus ``restarts`` random directions;
    quasi-norm unit balls are not convex, so a single start is unreliable.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape != (target.size, source.size):
        raise StructuralError("matrix does not map source to target")
    if not np.any(U):
        return 0.0
    if source.is_hilbert and target.is_hilbert and source.kind == target.kind == "FiniteLr":
        return spectral_norm(U)
    if source.kind == "FiniteLr" and source.exponent <= min(target.r, 1.0):
        # extreme points of the l^s ball (s <= 1) are the signed coordinate vectors
        cols = [float(rnorm(target, U[:, j].reshape(target.shape))) for j in range(source.size)]
        return max(cols)

    def ratio(x):
        nx = float(rnorm(source, x.reshape(source.shape)))
        if nx == 0:
            return 0.0
        return float(rnorm(target, (U @ x).reshape(target.shape))) / nx

    n = source.size
    g = rng.generator(seed, "quasi-norm")
    starts = list(np.eye(n)) + list(g.standard_normal((restarts, n)))
    best = 0.0
    for x0 in starts:
        best = max(best, ratio(x0))
        res = optimize.minimize(lambda x: -ratio(x), x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * n})
        best = max(best, -res.fun)
    return best


def _quadrature_sum_norm(space, flat, p, nodes=96):
    from .randsum import gaussian_quadrature_expectation

    k = flat.shape[0]
    val = gaussian_quadrature_expectation(
        lambda g: np.asarray(rnorm(space, (g @ flat).reshape((-1,) + space.shape))) ** p, k, nodes)
    return val ** (1.0 / p)


def check_matrix_contraction(A, vectors, p: float, count: int, seed: int,
                             space: RSpaceDescriptor | None = None, constant: float | None = None,
                             method: str = "monte-carlo",
                             name: str = "Gaussian matrix contraction") -> CheckRecord:
    """``||sum_i gamma_i sum_j a_ij x_j||_p <= C ||A|| ||sum_j gamma_j x_j||_p``.

    ``constant`` overrides ``C = 2^((1-r^p)/(r^p))`` (e.g. ``1`` to exhibit a
    violation).  ``method="quadrature"`` evaluates both sides by tensor
    Gauss-Hermite quadrature (at most three terms per side).
    """
    if space is None:
        space = vectors[0].space
    X = as_vectors(space, vectors)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != X.shape[0]:
        raise StructuralError(f"matrix with {A.shape[1]} columns cannot act on {X.shape[0]} vectors")
    flat = X.reshape(X.shape[0], -1)
    mixed = A @ flat
    normA = spectral_norm(A)
    C = symmetrization_constant(space.r, p) if constant is None else constant
    if method == "quadrature":
        lhs = _quadrature_sum_norm(space, mixed, p) if np.any(mixed) else 0.0
        rhs = _quadrature_sum_norm(space, flat, p)
        rel = 0.0
    else:
        gm = rng.normal(seed, ("contraction", "left"), (count, A.shape[0]))
        gn = rng.normal(seed, ("contraction", "right"), (count, A.shape[1]))
        el = _sum_moment(space, mixed, gm, p)
        er = _sum_moment(space, flat, gn, p)
        lhs, rhs = el.value, er.value
        rel = math.hypot(el.rel_error, er.rel_error)
    denom = normA * rhs
    ratio = lhs / denom if denom > 0 else 0.0
    ok = lhs <= C * denom * (1 + SLACK * rel) + 1e-15
    return CheckRecord(
        name=name, anchor="contraction of Gaussian sums by matrices",
        estimate=ratio, bound=C, verdict=verdict(ok), std_error=ratio * rel,
        method="quadrature" if method == "quadrature" else "monte-carlo",
        details={"p": p, "r": space.r, "lhs": lhs, "rhs": rhs, "operator_norm": normA},
    )


def check_ideal_property(U, R: FiniteRankOperator, V, p: float, count: int, seed: int,
                         target: RSpaceDescriptor | None = None, ons_trials: int = 16,
                         name: str = "γ-norm ideal property") -> CheckRecord:
    """``||U R V||_γ^p <= 2^((1-r^p)/(r^p)) ||U|| ||R||_γ^p ||V||`` with sampled suprema."""
    M = R.hilbert_dim
    U = np.eye(R.space.size) if U is None else np.atleast_2d(np.asarray(U, dtype=float))
    V = np.eye(M) if V is None else np.atleast_2d(np.asarray(V, dtype=float))
    URV = R.compose(U, V, target)
    target = URV.space
    normU = operator_quasi_norm(U, R.space, target, seed=seed)
    normV = spectral_norm(V)
    left = gamma_sup_norm(URV, p, ons_trials, count, seed)
    right = gamma_sup_norm(R, p, ons_trials, count, seed)
    C = symmetrization_constant(R.space.r, p)
    bound = C * normU * right.sup_value * normV
    rel = math.hypot(left.std_error / left.sup_value if left.sup_value else 0.0,
                     right.std_error / right.sup_value if right.sup_value else 0.0)
    ok = left.sup_value <= bound * (1 + SLACK * rel) + 1e-15
    scale = normU * right.sup_value * normV
    ratio = left.sup_value / scale if scale > 0 else 0.0
    return CheckRecord(
        name=name, anchor="ideal property of γ-norms under left and right composition",
        estimate=ratio, bound=C, verdict=verdict(ok), std_error=ratio * rel,
        details={"p": p, "r": R.space.r, "lhs": left.sup_value, "gamma_R": right.sup_value,
                 "norm_U": normU, "norm_V": normV},
    )


def square_function_norm(kernel, space: RSpaceDescriptor, time_weights=None) -> float:
    """``|| (sum_n |R h_n(s)|^2)^(1/2) ||_{E(S)}`` for a kernel ``k[s, n] = R h_n(s)``.

    With ``time_weights`` (cell lengths of a time grid) the kernel has shape
    ``(J, *S, M)`` and the inner sum becomes the Riemann sum
    ``sum_j w_j sum_n |k[j, s, n]|^2``.
    """
    k = np.asarray(kernel, dtype=float)
    if time_weights is None:
        if k.shape[:-1] != space.shape:
            raise StructuralError("kernel does not match the index set of the space")
        sq = np.sum(k ** 2, axis=-1)
    else:
        w = np.asarray(time_weights, dtype=float)
        if k.shape[0] != w.size or k.shape[1:-1] != space.shape:
            raise StructuralError("kernel does not match time grid and index set")
        sq = np.tensordot(w, np.sum(k ** 2, axis=-1), axes=1)
    return float(rnorm(space, np.sqrt(sq)))


def besov_gamma_norm(components, sigma: float, p: float, q: float) -> float:
    """Besov norm of an H-valued field given by its H-components (inner l^2)."""
    from .besovlp import besov_norm

    return float(besov_norm(list(components), sigma, p, q))


def basis_test_partial_sums(R: FiniteRankOperator, p: float, count: int, seed: int) -> list:
    """Moments of ``sum_{n <= N} gamma_n R h_n`` for ``N = 1..rank`` (common draws)."""
    gam = _gaussians(seed, count, R.rank)
    flat = R.vectors.reshape(R.rank, -1)
    partial = np.zeros((count, flat.shape[1]))
    out = []
    for n in range(R.rank):
        partial += gam[:, n:n + 1] * flat[n]
        out.append(moment_estimate(batch_norms(R.space, partial.reshape((-1,) + R.space.shape)), p))
    return out


def _kernel(R: FiniteRankOperator) -> np.ndarray:
    return np.moveaxis(R.vectors, 0, -1)


def square_function_ratio(R: FiniteRankOperator, p: float, count: int, seed: int) -> float:
    """Monte Carlo γ^p-norm divided by the square-function norm of the kernel."""
    formula = square_function_norm(_kernel(R), R.space)
    return gamma_basis_norm(R, p, count, seed).value / formula if formula > 0 else 1.0


def check_square_function_hilbert(R: FiniteRankOperator, count: int, seed: int, ons_trials: int = 16,
                                  name: str = "square function in Hilbert space") -> CheckRecord:
    """In ``l^2_m`` the basis value, the sampled sup (p = 2) and the square function coincide."""
    if not R.space.is_hilbert:
        raise ValidationError("the Hilbert route comparison needs a Hilbert space")
    formula = square_function_norm(_kernel(R), R.space)
    est = gamma_sup_norm(R, 2.0, ons_trials, count, seed)
    ok = (abs(est.basis_value - formula) <= SLACK * est.basis_error
          and abs(est.sup_value - formula) <= SLACK * est.std_error)
    return CheckRecord(
        name=name, anchor="square-function description of the γ-norm", estimate=est.basis_value,
        bound=formula, verdict=verdict(ok), std_error=est.basis_error,
        details={"basis": est.basis_value, "sup": est.sup_value, "formula": formula,
                 "hilbert_schmidt": float(np.sqrt(np.sum(R.vectors ** 2)))},
    )


def check_square_function_bracket(operators, p: float, count: int, seed: int, bracket=None,
                                  stability: float = 0.25,
                                  name: str = "square-function equivalence bracket") -> CheckRecord:
    """Ratios of the γ-norm to the square function stay in a fixed bracket.

    Ratios are computed at ``count`` and on fresh draws at ``2 count``.
    ``bracket`` is the frozen ``(low, high)`` pair; when omitted it is frozen
    from the ``count`` run and reported in the details.  PASS iff every
    doubled-count ratio lies in ``[low / (1 + stability), high (1 + stability)]``
    and no ratio moves by more than ``stability`` under the doubling.
    """
    ops = list(operators)
    if not ops:
        raise ValidationError("need at least one operator")
    first = np.array([square_function_ratio(R, p, count, rng.derive_seed(seed, "first", i))
                      for i, R in enumerate(ops)])
    second = np.array([square_function_ratio(R, p, 2 * count, rng.derive_seed(seed, "doubled", i))
                       for i, R in enumerate(ops)])
    frozen = bracket is not None
    low, high = (float(bracket[0]), float(bracket[1])) if frozen else (float(first.min()), float(first.max()))
    inside = bool(np.all((second >= low / (1 + stability)) & (second <= high * (1 + stability))))
    drift = float(np.max(np.abs(second / first - 1.0)))
    ok = inside and drift <= stability
    return CheckRecord(
        name=name, anchor="square-function equivalence for γ-norms in lattices",
        estimate=float(second.max()), bound=high * (1 + stability), verdict=verdict(ok),
        details={"space": str(ops[0].space.kind), "p": p, "bracket": [low, high], "frozen": frozen,
                 "ratios": first.tolist(), "ratios_doubled": second.tolist(), "drift": drift,
                 "lower": low / (1 + stability), "upper": high * (1 + stability)},
    )
