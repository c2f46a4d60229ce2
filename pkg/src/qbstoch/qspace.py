"""Concrete r-normed spaces.

Three families are supported:

* ``FiniteLr``  -- ``R^n`` with ``||x|| = (sum |x_i|^s)^(1/s)``;
* ``GridLr``    -- sampled functions on the periodic unit torus ``[0,1)^d``
  with the Riemann-sum norm ``(N^-d sum |x_i|^s)^(1/s)``;
* ``BesovGrid`` -- sampled functions on the torus with a Littlewood-Paley
  Besov norm (see :mod:`qbstoch.besovlp`).

For the Lebesgue families the Lebesgue exponent ``s`` is stored separately
from the r-norm exponent ``r = min(s, 1)``: ``l^2`` is a 1-normed (even
Hilbert) space while ``l^(1/2)`` is a 1/2-normed space.  For ``BesovGrid``
``r = min(p, q, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import StructuralError, ValidationError

__all__ = [
    "Kind", "RSpaceDescriptor", "RVector", "ell", "grid_lr", "besov_grid",
    "rnorm", "quasi_constant", "aoki_rolewicz_exponent", "symmetrization_constant",
    "as_vectors",
]


class Kind(str, Enum):
    FINITE_LR = "FiniteLr"
    GRID_LR = "GridLr"
    BESOV_GRID = "BesovGrid"


@dataclass(frozen=True)
class RSpaceDescriptor:
    """A finite-dimensional r-normed space.

    Parameters
    ----------
    kind : Kind
    shape : tuple of int
        Coordinate shape of one element.  ``(n,)`` for ``FiniteLr``,
        ``(N,)*d`` for the grid families.
    exponent : float
        Lebesgue exponent ``s > 0`` of the Lebesgue families.  Ignored for
        ``BesovGrid``.
    sigma, p, q : float
        Besov parameters (``BesovGrid`` only).
    """

    kind: Kind
    shape: tuple
    exponent: float = 2.0
    sigma: float = 0.0
    p: float = 2.0
    q: float = 2.0
    _bank: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if not self.shape or any(s <= 0 for s in self.shape):
            raise ValidationError(f"shape must be positive integers, got {self.shape}")
        if self.kind is Kind.BESOV_GRID:
            if self.p <= 0 or self.q <= 0:
                raise ValidationError("Besov exponents p, q must be positive")
            if len(self.shape) not in (1, 2) or len(set(self.shape)) != 1:
                raise ValidationError("BesovGrid needs a square grid in d=1 or d=2")
        elif self.exponent <= 0:
            raise ValidationError("Lebesgue exponent must be positive")
        if self.kind is not Kind.FINITE_LR and len(set(self.shape)) != 1:
            raise ValidationError("grid spaces use N points on every axis")

    @property
    def r(self) -> float:
        """The r-norm exponent in (0, 1]."""
        if self.kind is Kind.BESOV_GRID:
            return min(self.p, self.q, 1.0)
        return min(self.exponent, 1.0)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def is_hilbert(self) -> bool:
        return self.kind is not Kind.BESOV_GRID and self.exponent == 2.0

    def norm(self, x) -> np.ndarray:
        return rnorm(self, x)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "shape": list(self.shape)}
        if self.kind is Kind.BESOV_GRID:
            out.update(sigma=self.sigma, p=self.p, q=self.q)
        else:
            out["exponent"] = self.exponent
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RSpaceDescriptor":
        data = dict(data)
        return cls(kind=Kind(data.pop("kind")), shape=tuple(data.pop("shape")), **data)

    def label(self) -> str:
        if self.kind is Kind.FINITE_LR:
            return f"l^{self.exponent:g}_{self.shape[0]}"
        if self.kind is Kind.GRID_LR:
            return f"L^{self.exponent:g}(T^{self.d}, N={self.shape[0]})"
        return f"B^{self.sigma:g}_{self.p:g},{self.q:g}(T^{self.d}, N={self.shape[0]})"


def ell(exponent: float, dim: int) -> RSpaceDescriptor:
    """The sequence space ``l^exponent`` on ``dim`` coordinates."""
    return RSpaceDescriptor(Kind.FINITE_LR, (dim,), exponent=exponent)


def grid_lr(exponent: float, N: int, d: int = 1) -> RSpaceDescriptor:
    return RSpaceDescriptor(Kind.GRID_LR, (N,) * d, exponent=exponent)


def besov_grid(sigma: float, p: float, q: float, N: int, d: int = 1) -> RSpaceDescriptor:
    return RSpaceDescriptor(Kind.BESOV_GRID, (N,) * d, sigma=sigma, p=p, q=q)


@dataclass(frozen=True)
class RVector:
    """An element of an :class:`RSpaceDescriptor`."""

    space: RSpaceDescriptor
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.space.shape:
            raise StructuralError(f"data shape {data.shape} does not match space shape {self.space.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("RVector entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def norm(self) -> float:
        return float(rnorm(self.space, self.data))


def as_vectors(space: RSpaceDescriptor, vectors) -> np.ndarray:
    """Stack a sequence of RVectors (or an array) into shape ``(n, *space.shape)``."""
    if isinstance(vectors, RVector):
        vectors = [vectors]
    if isinstance(vectors, (list, tuple)):
        if len(vectors) == 0:
            raise ValidationError("vector list is empty")
        items = []
        for v in vectors:
            if isinstance(v, RVector):
                if v.space != space:
                    raise StructuralError("vectors do not share the space")
                items.append(v.data)
            else:
                items.append(np.asarray(v, dtype=float))
        arr = np.stack(items)
    else:
        arr = np.asarray(vectors, dtype=float)
        if arr.shape == space.shape:
            arr = arr[None]
    if arr.shape[1:] != space.shape:
        raise StructuralError(f"vectors of shape {arr.shape[1:]} do not belong to {space.label()}")
    if arr.shape[0] == 0:
        raise ValidationError("vector list is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vectors must have finite entries")
    return arr


def rnorm(space: RSpaceDescriptor, x) -> np.ndarray:
    """r-norm of ``x``; leading axes beyond ``space.shape`` are batch axes.

    The maximal coordinate modulus is factored out before powering, so that
    small exponents neither underflow nor overflow.
    """
    x = np.asarray(x, dtype=float)
    nd = len(space.shape)
    if x.shape[x.ndim - nd:] != space.shape:
        raise StructuralError(f"array of shape {x.shape} does not end in {space.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite entry")
    if space.kind is Kind.BESOV_GRID:
        from .besovlp import besov_norm  # circular at import time

        return besov_norm(x, space.sigma, space.p, space.q, d=space.d)
    axes = tuple(range(x.ndim - nd, x.ndim))
    a = np.abs(x)
    m = a.max(axis=axes, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    s = space.exponent
    total = np.sum((a / safe) ** s, axis=axes)
    if space.kind is Kind.GRID_LR:
        total = total / space.size
    out = np.squeeze(m, axis=axes) * total ** (1.0 / s)
    return out[()] if out.ndim == 0 else out


def quasi_constant(space_or_r) -> float:
    """Quasi-triangle constant ``2^((1-r)/r)`` induced by an r-norm."""
    r = space_or_r.r if isinstance(space_or_r, RSpaceDescriptor) else float(space_or_r)
    if not 0 < r <= 1:
        raise ValidationError(f"r must lie in (0, 1], got {r}")
    return 2.0 ** ((1.0 - r) / r)


def aoki_rolewicz_exponent(C: float) -> float:
    """The exponent ``r`` with ``(2C)^r = 2``; inverse of :func:`quasi_constant`."""
    if not C >= 1:
        raise ValidationError(f"quasi-triangle constant must be >= 1, got {C}")
    return 1.0 / math.log2(2.0 * C)


def symmetrization_constant(r: float, p: float) -> float:
    """``2^((1 - r^p)/(r^p))`` with ``r^p = min(r, p)``.

    This constant appears in every comparison between Gaussian sums used in
    the package (adding an independent symmetric term, matrix contraction,
    the ideal property, γ-norm sandwiches).
    """
    if p <= 0:
        raise ValidationError("moment exponent p must be positive")
    return quasi_constant(min(r, p))
