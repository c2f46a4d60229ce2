"""Stochastic integrals of deterministic finite-rank step functions.

A step function ``Phi(t) = sum_j 1_(t_{j-1}, t_j](t) sum_k h_k (x) x_{j,k}`` is
integrated against a cylindrical Brownian motion: the processes
``W(1_(0,t] (x) h_k)`` are independent Brownian motions, so the integral is
``sum_{j,k} (B_k(t_j ^ t) - B_k(t_{j-1} ^ t)) x_{j,k}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import CouplingError, StructuralError, ValidationError
from .gammaop import FiniteRankOperator, gamma_sup_norm, random_ons
from .qspace import RSpaceDescriptor, as_vectors, rnorm, symmetrization_constant
from .randsum import batch_norms, moment_estimate
from .report import CheckRecord, verdict

__all__ = [
    "FiniteRankStepFunction", "IntegralPathEnsemble", "represent_operator", "simulate_paths",
    "brownian_increments", "integrate_increments", "dyadic_grid", "random_step_function",
    "check_ito_bounds", "check_sup_bound", "check_series_expansion", "check_ito_isometry",
]

SLACK = 3.0


@dataclass(frozen=True)
class FiniteRankStepFunction:
    """Partition ``0 = t_0 < ... < t_J = T``, orthonormal ``h_1..h_K`` in ``R^M``
    and coefficients ``x[j, k]`` of shape ``(J, K, *space.shape)``."""

    partition: np.ndarray
    ons: np.ndarray
    coefficients: np.ndarray
    space: RSpaceDescriptor

    def __post_init__(self):
        t = np.asarray(self.partition, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValidationError("partition must start at 0 and increase strictly")
        ons = np.atleast_2d(np.asarray(self.ons, dtype=float))
        if np.abs(ons @ ons.T - np.eye(ons.shape[0])).max() > 1e-10:
            raise ValidationError("ONS Gram matrix deviates from the identity")
        c = np.asarray(self.coefficients, dtype=float)
        J, K = t.size - 1, ons.shape[0]
        if c.shape != (J, K) + self.space.shape:
            raise StructuralError(f"coefficients must have shape {(J, K) + self.space.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("coefficients must be finite")
        for name, a in (("partition", t), ("ons", ons), ("coefficients", c)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def J(self) -> int:
        return self.partition.size - 1

    @property
    def K(self) -> int:
        return self.ons.shape[0]

    @property
    def T(self) -> float:
        return float(self.partition[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.partition)

    def __add__(self, other):
        if (not np.array_equal(self.partition, other.partition)
                or not np.array_equal(self.ons, other.ons) or self.space != other.space):
            raise StructuralError("step functions must share partition, ONS and space")
        return FiniteRankStepFunction(self.partition, self.ons, self.coefficients + other.coefficients, self.space)

    def scaled(self, c: float) -> "FiniteRankStepFunction":
        return FiniteRankStepFunction(self.partition, self.ons, c * self.coefficients, self.space)

    def permuted(self, order) -> "FiniteRankStepFunction":
        """The same function written with the ONS members reordered."""
        order = np.asarray(order)
        return FiniteRankStepFunction(self.partition, self.ons[order], self.coefficients[:, order], self.space)

    def refined(self) -> "FiniteRankStepFunction":
        """Every step split in two halves with the same coefficients."""
        t = self.partition
        mid = (t[:-1] + t[1:]) / 2
        new_t = np.empty(2 * self.J + 1)
        new_t[0::2], new_t[1::2] = t, mid
        return FiniteRankStepFunction(new_t, self.ons, np.repeat(self.coefficients, 2, axis=0), self.space)

    def hilbert_schmidt_sq(self) -> float:
        """``sum_{j,k} (t_j - t_{j-1}) ||x_{j,k}||_2^2`` (the HS norm squared in coordinates)."""
        c = self.coefficients.reshape(self.J, self.K, -1)
        return float(np.sum(self.steps[:, None] * np.sum(c ** 2, axis=-1)))

    def to_dict(self) -> dict:
        return {"partition": self.partition.tolist(), "ons": self.ons.tolist(),
                "coefficients": self.coefficients.tolist(), "space": self.space.to_dict()}

    @classmethod
    def from_dict(cls, data) -> "FiniteRankStepFunction":
        return cls(np.array(data["partition"]), np.array(data["ons"]),
                   np.array(data["coefficients"]), RSpaceDescriptor.from_dict(data["space"]))


def random_step_function(space: RSpaceDescriptor, J: int, K: int, M: int, seed: int, *path,
                         T: float = 1.0) -> FiniteRankStepFunction:
    g = rng.generator(seed, "step-function", *path)
    cuts = np.sort(g.uniform(0.1, 0.9, J - 1)) * T
    partition = np.concatenate([[0.0], cuts, [T]])
    return FiniteRankStepFunction(partition, random_ons(g, M, K),
                                  g.standard_normal((J, K) + space.shape), space)


def represent_operator(phi: FiniteRankStepFunction) -> FiniteRankOperator:
    """The operator on ``L^2(0,T; R^M)`` truncated to ``span{1_(t_{j-1},t_j]} (x) R^M``.

    The normalized indicators ``e_j`` are the coordinates of the time factor,
    so the ONS members are ``e_j (x) h_k`` in ``R^(J M)`` with images
    ``sqrt(t_j - t_{j-1}) x_{j,k}``.
    """
    J, K, M = phi.J, phi.K, phi.ons.shape[1]
    ons = np.einsum("ja,kb->jkab", np.eye(J), phi.ons).reshape(J * K, J * M)
    vecs = np.sqrt(phi.steps).reshape((J, 1) + (1,) * len(phi.space.shape)) * phi.coefficients
    return FiniteRankOperator(ons, vecs.reshape((J * K,) + phi.space.shape), phi.space)


def dyadic_grid(partition, level: int) -> np.ndarray:
    """Union of the partition with ``{i T 2^-level}``."""
    partition = np.asarray(partition, dtype=float)
    T = partition[-1]
    return np.unique(np.concatenate([partition, T * np.arange(2 ** level + 1) / 2 ** level]))


@dataclass
class IntegralPathEnsemble:
    """Paths ``(count, len(times), *space.shape)`` with the driving increments."""

    times: np.ndarray
    paths: np.ndarray
    space: RSpaceDescriptor
    seed: int
    increments: np.ndarray = field(repr=False)
    label: str = "paths"

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    def final(self) -> np.ndarray:
        return self.paths[:, -1]

    def norms(self) -> np.ndarray:
        """``(count, len(times))`` norms of all path values."""
        flat = self.paths.reshape((-1,) + self.space.shape)
        return batch_norms(self.space, flat).reshape(self.count, -1)

    def sup_norms(self) -> np.ndarray:
        return self.norms().max(axis=1)

    def to_table(self) -> np.ndarray:
        """Rows ``(time, path index, coordinates...)`` in row-major order."""
        n_t = self.times.size
        t = np.tile(self.times, self.count)
        idx = np.repeat(np.arange(self.count), n_t)
        return np.column_stack([t, idx, self.paths.reshape(self.count * n_t, -1)])

    def save_table(self, path, delimiter: str = ",") -> Path:
        coords = ",".join(f"x{i}" for i in range(self.space.size))
        np.savetxt(path, self.to_table(), delimiter=delimiter, header=f"time,path,{coords}".replace(",", delimiter))
        return Path(path)


def _cell_index(grid, partition):
    """For each grid cell, the step of the partition containing it."""
    grid = np.asarray(grid, dtype=float)
    partition = np.asarray(partition, dtype=float)
    if grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("time grid must start at 0 and increase strictly")
    if not np.isclose(grid[-1], partition[-1], rtol=0, atol=1e-14):
        raise ValidationError("time grid must end at the horizon T")
    hits = np.isclose(grid[:, None], partition[None, :], rtol=0, atol=1e-12).any(axis=0)
    if not hits.all():
        raise ValidationError("time grid does not refine the partition")
    mids = (grid[:-1] + grid[1:]) / 2
    return np.searchsorted(partition, mids) - 1


def brownian_increments(seed: int, grid, K: int, count: int, label: str = "wiener") -> np.ndarray:
    """Independent ``N(0, dt)`` increments of shape ``(count, cells, K)``."""
    dt = np.diff(np.asarray(grid, dtype=float))
    z = rng.normal(seed, (label, "increments", K), (count, dt.size * K)).reshape(count, dt.size, K)
    return z * np.sqrt(dt)[None, :, None]


def integrate_increments(coeff_per_cell, increments, space) -> np.ndarray:
    """Cumulative sums ``path(t_m) = sum_{i<m} sum_k dW[i,k] c[i,k]``; path(0) = 0.

    ``coeff_per_cell`` is either ``(cells, K, *shape)`` (deterministic) or
    ``(count, cells, K, *shape)`` (one coefficient table per path).
    """
    count, cells, K = increments.shape
    c = np.asarray(coeff_per_cell)
    if c.ndim == 2 + len(space.shape):
        steps = np.einsum("nik,ikd->nid", increments, c.reshape(cells, K, -1))
    else:
        steps = np.einsum("nik,nikd->nid", increments, c.reshape(count, cells, K, -1))
    paths = np.zeros((count, cells + 1, steps.shape[-1]))
    np.cumsum(steps, axis=1, out=paths[:, 1:])
    return paths.reshape((count, cells + 1) + space.shape)


def simulate_paths(phi: FiniteRankStepFunction, grid, count: int, seed: int,
                   increments: np.ndarray | None = None, label: str = "wiener") -> IntegralPathEnsemble:
    """Paths of ``t -> R_Phi . W(t)`` on ``grid`` (which must refine the partition)."""
    grid = np.asarray(grid, dtype=float)
    cell = _cell_index(grid, phi.partition)
    if increments is None:
        increments = brownian_increments(seed, grid, phi.K, count, label)
    elif increments.shape != (count, grid.size - 1, phi.K):
        raise StructuralError("increment record does not match grid and ONS size")
    paths = integrate_increments(phi.coefficients[cell], increments, phi.space)
    return IntegralPathEnsemble(grid, paths, phi.space, seed, increments, label)


def check_ito_bounds(phi: FiniteRankStepFunction, p: float, count: int, seed: int,
                     ons_trials: int = 16, name: str = "Ito sandwich") -> CheckRecord:
    """``2^-((1-r^p)/(r^p)) ||R_Phi||_γ^p <= ||R_Phi . W(T)||_{L^p} <= ||R_Phi||_γ^p``."""
    R = represent_operator(phi)
    gam = gamma_sup_norm(R, p, ons_trials, count, rng.derive_seed(seed, "gamma"))
    ens = simulate_paths(phi, phi.partition, count, seed)
    est = moment_estimate(batch_norms(phi.space, ens.final()), p)
    C = symmetrization_constant(phi.space.r, p)
    rel = math.hypot(est.rel_error, gam.std_error / gam.sup_value if gam.sup_value else 0.0)
    lower_ok = gam.sup_value / C <= est.value * (1 + SLACK * rel) + 1e-15
    upper_ok = est.value <= gam.sup_value * (1 + SLACK * rel) + 1e-15
    return CheckRecord(
        name=name, anchor="two-sided Ito bound by the γ-norm", estimate=est.value,
        bound=gam.sup_value, verdict=verdict(lower_ok and upper_ok), std_error=est.std_error,
        details={"p": p, "r": phi.space.r, "lower": gam.sup_value / C, "upper": gam.sup_value,
                 "lower_ok": lower_ok, "upper_ok": upper_ok},
    )


def check_sup_bound(phi: FiniteRankStepFunction, p: float, count: int, seed: int, level: int = 6,
                    ons_trials: int = 16, name: str = "maximal bound for Wiener integrals") -> CheckRecord:
    """``(E sup_t ||R_Phi . W(t)||^p)^(1/p) <= 2^(1/p+1/r-1) ||R_Phi||_γ^p`` on a dyadic grid."""
    R = represent_operator(phi)
    gam = gamma_sup_norm(R, p, ons_trials, count, rng.derive_seed(seed, "gamma"))
    ens = simulate_paths(phi, dyadic_grid(phi.partition, level), count, seed)
    est = moment_estimate(ens.sup_norms(), p)
    r = phi.space.r
    C = 2.0 ** (1.0 / p + 1.0 / r - 1.0)
    rel = math.hypot(est.rel_error, gam.std_error / gam.sup_value if gam.sup_value else 0.0)
    ok = est.value <= C * gam.sup_value * (1 + SLACK * rel) + 1e-15
    ratio = est.value / gam.sup_value if gam.sup_value > 0 else 0.0
    return CheckRecord(
        name=name, anchor="maximal inequality for the stochastic integral process",
        estimate=ratio, bound=C, verdict=verdict(ok), std_error=ratio * rel,
        details={"p": p, "r": r, "sup_moment": est.value, "gamma_norm": gam.sup_value,
                 "level": level, "grid_points": int(ens.times.size)},
    )


def check_series_expansion(phi: FiniteRankStepFunction, count: int, seed: int,
                           basis_size: int | None = None, tol: float = 1e-10,
                           name: str = "series expansion over the ONS") -> CheckRecord:
    """Direct simulation equals the sum of per-member integrals under shared increments."""
    if basis_size is not None and phi.K > basis_size:
        raise ValidationError("the basis cut must contain the ONS")
    grid = phi.partition
    direct = simulate_paths(phi, grid, count, seed)
    cell = _cell_index(grid, phi.partition)
    total = np.zeros_like(direct.paths)
    for k in range(phi.K):
        inc_k = direct.increments[:, :, k:k + 1]
        total += integrate_increments(phi.coefficients[cell][:, k:k + 1], inc_k, phi.space)
    if total.shape != direct.paths.shape:
        raise CouplingError("component integrals do not share the direct simulation's noise")
    err = float(np.abs(total - direct.paths).max()) if count else 0.0
    return CheckRecord(
        name=name, anchor="series expansion of the stochastic integral over an orthonormal basis",
        estimate=err, bound=tol, verdict=verdict(err <= tol), method="exact",
        details={"K": phi.K, "count": count},
    )


def check_ito_isometry(phi: FiniteRankStepFunction, count: int, seed: int,
                       name: str = "Ito isometry") -> CheckRecord:
    """Hilbert case: ``E ||R_Phi . W(T)||^2`` equals ``||R_Phi||_HS^2`` within 3 SE."""
    if not phi.space.is_hilbert:
        raise ValidationError("the isometry holds in Hilbert spaces only")
    ens = simulate_paths(phi, phi.partition, count, seed)
    sq = batch_norms(phi.space, ens.final()) ** 2
    mean = float(sq.mean())
    se = float(sq.std(ddof=1) / math.sqrt(count)) if count > 1 else math.inf
    hs = phi.hilbert_schmidt_sq()
    ok = abs(mean - hs) <= SLACK * se
    return CheckRecord(
        name=name, anchor="Ito isometry for Hilbert-valued Wiener integrals", estimate=mean,
        bound=hs, verdict=verdict(ok), std_error=se, details={"abs_error": abs(mean - hs)},
    )
