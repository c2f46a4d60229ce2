"""Spectral simulation of the stochastic heat equation on the periodic torus.

``dU = Delta U dt + f dt + sum_k g_k e_k dW_k`` with time-constant forcing and
noise that is diagonal in Fourier space.  A real field is stored through the
coefficients ``c_k`` of a half lattice of frequencies (``c_-k = conj c_k``).
Each coefficient is an Ornstein-Uhlenbeck process with rate
``a_k = 4 pi^2 |k|^2``, advanced by its exact transition between the stored
times, so no time-stepping error enters the statistics.

Fourier amplitudes follow a decay dictionary: ``|g_k| = A (1 + |k|^2)^(-s_g/2)``
lies in ``B^(s)_{2,2}`` exactly for ``s < s_g - d/2``; the noise exponent
``beta`` of a configuration is defined by ``sigma - 2 beta = s_g - d/2 - eps``
(and likewise ``alpha`` for the forcing).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import rng
from .besovlp import GridField, LPWindowBank, _lq_combine, besov_norm, window_bank
from .errors import ValidationError
from .randsum import moment_estimate
from .report import CheckRecord, verdict

__all__ = [
    "HeatExperimentConfig", "SolutionEnsemble", "half_lattice", "simulate_mild_solution",
    "mode_variance", "mode_mean", "second_moment_oracle", "measure_space_regularity",
    "mode_cutoff_diagnostic", "measure_time_hoelder", "HoelderFit", "hoelder_times",
    "weighted_Lr_alpha_norm", "check_solution_identity", "spectral_besov_norm",
]


@dataclass(frozen=True)
class HeatExperimentConfig:
    """Parameters of one heat-equation experiment.

    Amplitudes of zero switch the corresponding term off.  ``modes`` is the
    frequency cutoff: every frequency with ``|k| <= modes`` is simulated.
    ``N`` (grid points per axis) defaults to the smallest power of two with
    ``N / 3 > modes``, so the fields are band-limited below ``N / 3``.
    """

    d: int = 1
    modes: int = 64
    N: int = 0
    times: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    u0_decay: float = 2.0
    u0_amplitude: float = 0.0
    u0_random: bool = True
    u0_seed: int = 0
    f_decay: float = 2.0
    f_amplitude: float = 0.0
    g_decay: float = 0.0
    g_amplitude: float = 1.0
    include_zero_mode: bool = True
    dictionary_eps: float = 0.02
    sigma: float = 0.0
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0
    lambdas: tuple = (0.1,)
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValidationError("d must be 1 or 2")
        if self.modes < 1:
            raise ValidationError("need at least one mode")
        N = self.N or 1 << max(2, math.ceil(math.log2(3 * self.modes + 1)))
        if N & (N - 1) or N / 3 <= self.modes:
            raise ValidationError(f"grid N={N} must be a power of two above 3 x modes")
        object.__setattr__(self, "N", int(N))
        times = tuple(float(t) for t in self.times)
        if times[0] != 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("times must start at 0 and increase strictly")
        for t in times:
            if not _is_dyadic(t):
                raise ValidationError(f"time {t} is not a dyadic rational")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if self.count < 1:
            raise ValidationError("count must be positive")
        if self.f_amplitude and self.alpha >= 1:
            raise ValidationError(f"forcing decay gives alpha = {self.alpha:.3g}, outside [0, 1)")
        if self.g_amplitude and self.beta >= 0.5:
            raise ValidationError(f"noise decay gives beta = {self.beta:.3g}, outside [0, 1/2)")

    @property
    def T(self) -> float:
        return self.times[-1]

    # a term smoother than required is admissible at exponent 0
    @property
    def alpha(self) -> float:
        return max((self.sigma - self.f_decay + self.d / 2 + self.dictionary_eps) / 2, 0.0)

    @property
    def beta(self) -> float:
        return max((self.sigma - self.g_decay + self.d / 2 + self.dictionary_eps) / 2, 0.0)

    def exponent_cap(self) -> float:
        """``alpha ^ beta`` over the active terms (``inf`` when neither is active)."""
        caps = [e for e, amp in ((self.alpha, self.f_amplitude), (self.beta, self.g_amplitude)) if amp]
        return min(caps) if caps else math.inf

    @classmethod
    def from_exponents(cls, sigma: float, beta: float | None = None, alpha: float | None = None,
                       **kwargs) -> "HeatExperimentConfig":
        """Choose the decays that realize the requested ``alpha``, ``beta``."""
        d = kwargs.get("d", 1)
        eps = kwargs.get("dictionary_eps", cls.dictionary_eps)
        if beta is not None:
            kwargs["g_decay"] = sigma - 2 * beta + d / 2 + eps
        if alpha is not None:
            kwargs["f_decay"] = sigma - 2 * alpha + d / 2 + eps
        return cls(sigma=sigma, **kwargs)

    def replace(self, **changes) -> "HeatExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["times"] = list(self.times)
        out["lambdas"] = list(self.lambdas)
        return out


def _is_dyadic(t: float, max_level: int = 40) -> bool:
    return float(t * 2 ** max_level).is_integer()


def half_lattice(modes: int, d: int):
    """Frequencies with ``|k| <= modes`` in a half lattice; returns (k (n, d), multiplicity)."""
    r = np.arange(-modes, modes + 1)
    if d == 1:
        k = np.arange(modes + 1)[:, None]
    else:
        k1, k2 = np.meshgrid(r, np.arange(modes + 1), indexing="ij")
        k = np.column_stack([k1.ravel(), k2.ravel()])
        keep = ((k[:, 1] > 0) | ((k[:, 1] == 0) & (k[:, 0] >= 0))) & (np.sum(k ** 2, axis=1) <= modes ** 2)
        k = k[keep]
        k = k[np.lexsort((k[:, 0], np.sum(k ** 2, axis=1)))]
    mult = np.where(np.any(k != 0, axis=1), 2.0, 1.0)
    return k.astype(int), mult


def _amplitudes(abs_k, amplitude, decay):
    return amplitude * (1.0 + abs_k ** 2) ** (-decay / 2)


def _complex_normal(z_re, z_im):
    """Complex Gaussian with ``E|z|^2 = 1`` from two standard normals."""
    return (z_re + 1j * z_im) / math.sqrt(2.0)


@dataclass
class SolutionEnsemble:
    """Coefficients ``(paths, times, modes)`` of the simulated solution."""

    config: HeatExperimentConfig
    times: np.ndarray
    k: np.ndarray
    multiplicity: np.ndarray
    coefficients: np.ndarray
    u0: np.ndarray
    noise: np.ndarray = field(repr=False)
    flags: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.coefficients.shape[0]

    @cached_property
    def abs_k(self) -> np.ndarray:
        return np.sqrt(np.sum(self.k ** 2, axis=1))

    def time_index(self, t: float) -> int:
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-14))
        if hit.size == 0:
            raise ValidationError(f"time {t} is not on the ensemble grid")
        return int(hit[0])

    def full_spectrum(self, coeffs) -> np.ndarray:
        """Scatter half-lattice coefficients ``(..., modes)`` into ``(..., N^d)`` spectra."""
        N, d = self.config.N, self.config.d
        coeffs = np.asarray(coeffs)
        out = np.zeros(coeffs.shape[:-1] + (N,) * d, dtype=complex)
        idx = tuple(self.k[:, i] % N for i in range(d))
        neg = tuple((-self.k[:, i]) % N for i in range(d))
        out[(Ellipsis,) + neg] = np.conj(coeffs)
        out[(Ellipsis,) + idx] = coeffs
        return out

    def grid_values(self, coeffs) -> np.ndarray:
        N, d = self.config.N, self.config.d
        axes = tuple(range(-d, 0))
        return np.real(np.fft.ifftn(self.full_spectrum(coeffs) * N ** d, axes=axes))

    def field(self, path: int, t: float) -> GridField:
        return GridField(self.grid_values(self.coefficients[path, self.time_index(t)]), self.config.d)

    def truncated(self, cutoff: float) -> "SolutionEnsemble":
        """The same ensemble restricted to frequencies ``|k| <= cutoff``."""
        keep = self.abs_k <= cutoff
        return dataclasses.replace(self, k=self.k[keep], multiplicity=self.multiplicity[keep],
                                   coefficients=self.coefficients[..., keep], u0=self.u0[..., keep],
                                   noise=self.noise[..., keep], flags=dict(self.flags, cutoff=cutoff))

    def to_table(self) -> np.ndarray:
        """Rows ``(path, time, k..., real, imag)``."""
        P, T, M = self.coefficients.shape
        pi, ti, mi = np.meshgrid(np.arange(P), np.arange(T), np.arange(M), indexing="ij")
        c = self.coefficients.ravel()
        return np.column_stack([pi.ravel(), self.times[ti.ravel()], self.k[mi.ravel()], c.real, c.imag])


def _initial_coefficients(cfg: HeatExperimentConfig, abs_k, count):
    amp = _amplitudes(abs_k, cfg.u0_amplitude, cfg.u0_decay)
    if not cfg.u0_amplitude:
        return np.zeros((count, abs_k.size), dtype=complex)
    if not cfg.u0_random:
        return np.broadcast_to(amp.astype(complex), (count, abs_k.size)).copy()
    z = rng.normal(cfg.u0_seed, ("heat", "u0"), (count, abs_k.size, 2))
    xi = _complex_normal(z[..., 0], z[..., 1])
    xi[:, abs_k == 0] = z[:, abs_k == 0, 0]
    return amp * xi


def simulate_mild_solution(cfg: HeatExperimentConfig, f_time=None, g_time=None) -> SolutionEnsemble:
    """Exact per-mode transitions over ``cfg.times``.

    Between consecutive times ``Delta`` apart, with ``a = 4 pi^2 |k|^2``::

        c(t + Delta) = e^(-a Delta) c(t) + f_k (1 - e^(-a Delta)) / a + g_k I

    where ``I`` is the stochastic convolution increment,
    ``E|I|^2 = (1 - e^(-2 a Delta)) / (2 a)``.  The Brownian increment
    ``dW`` over the same interval is drawn jointly with ``I``
    (``Cov(I, dW) = (1 - e^(-a Delta)) / a``) and retained.  Zero-frequency
    limits are used at ``a = 0``.  ``f_time``/``g_time`` are optional scalar
    time modulations, frozen at the left end of each interval (first-order
    biased, flagged in the ensemble).
    """
    k, mult = half_lattice(cfg.modes, cfg.d)
    abs_k = np.sqrt(np.sum(k ** 2, axis=1))
    a = 4 * np.pi ** 2 * abs_k ** 2
    f = _amplitudes(abs_k, cfg.f_amplitude, cfg.f_decay)
    g = _amplitudes(abs_k, cfg.g_amplitude, cfg.g_decay)
    if not cfg.include_zero_mode:
        f = np.where(abs_k == 0, 0.0, f)
        g = np.where(abs_k == 0, 0.0, g)
    times = np.asarray(cfg.times)
    P, M, S = cfg.count, abs_k.size, times.size - 1
    u0 = _initial_coefficients(cfg, abs_k, P)
    # driven part V starts at 0; initial data enters in closed form e^(-a t) u0
    driven = np.zeros((P, S + 1, M), dtype=complex)
    dW = np.zeros((P, S, M), dtype=complex)
    z = rng.normal(cfg.seed, ("heat", "noise"), (P, S * M * 4)).reshape(P, S, M, 4) if cfg.g_amplitude else None
    zero = a == 0
    safe_a = np.where(zero, 1.0, a)
    for s in range(S):
        dt = times[s + 1] - times[s]
        decay = np.exp(-a * dt)
        one_minus = np.where(zero, dt, -np.expm1(-a * dt) / safe_a)           # int_0^dt e^{-a u} du
        var_i = np.where(zero, dt, -np.expm1(-2 * a * dt) / (2 * safe_a))
        fmod = 1.0 if f_time is None else float(f_time(times[s]))
        gmod = 1.0 if g_time is None else float(g_time(times[s]))
        new = decay * driven[:, s] + fmod * f * one_minus
        if z is not None:
            sd_i = np.sqrt(var_i)
            slope = one_minus / sd_i
            resid = np.sqrt(np.clip(dt - slope ** 2, 0.0, None))
            zz = z[:, s]
            i_re = sd_i * zz[..., 0]
            i_im = sd_i * zz[..., 1]
            w_re = slope * zz[..., 0] + resid * zz[..., 2]
            w_im = slope * zz[..., 1] + resid * zz[..., 3]
            # zero frequency is a single real Brownian motion
            i_re = np.where(zero, i_re * math.sqrt(2.0), i_re)
            w_re = np.where(zero, w_re * math.sqrt(2.0), w_re)
            i_im = np.where(zero, 0.0, i_im)
            w_im = np.where(zero, 0.0, w_im)
            new = new + gmod * g * _complex_normal(i_re, i_im)
            dW[:, s] = _complex_normal(w_re, w_im)
        driven[:, s + 1] = new
    coeffs = np.exp(-a[None, :] * times[:, None])[None] * u0[:, None, :] + driven
    flags = {"first_order_biased": f_time is not None or g_time is not None,
             "g": g, "f": f}
    return SolutionEnsemble(cfg, times, k, mult, coeffs, u0, dW, flags)


def mode_variance(cfg: HeatExperimentConfig, t: float, abs_k=None) -> np.ndarray:
    """``E|c_k(t) - E c_k(t)|^2`` per half-lattice mode (noise plus random initial data)."""
    if abs_k is None:
        k, _ = half_lattice(cfg.modes, cfg.d)
        abs_k = np.sqrt(np.sum(k ** 2, axis=1))
    a = 4 * np.pi ** 2 * abs_k ** 2
    g = _amplitudes(abs_k, cfg.g_amplitude, cfg.g_decay)
    if not cfg.include_zero_mode:
        g = np.where(abs_k == 0, 0.0, g)
    with np.errstate(invalid="ignore", divide="ignore"):
        conv = np.where(a == 0, t, -np.expm1(-2 * a * t) / (2 * np.where(a == 0, 1.0, a)))
    var = g ** 2 * conv
    if cfg.u0_amplitude and cfg.u0_random:
        var = var + _amplitudes(abs_k, cfg.u0_amplitude, cfg.u0_decay) ** 2 * np.exp(-2 * a * t)
    return var


def mode_mean(cfg: HeatExperimentConfig, t: float, abs_k=None) -> np.ndarray:
    """``E c_k(t)``: heat-smoothed deterministic data plus the forcing profile."""
    if abs_k is None:
        k, _ = half_lattice(cfg.modes, cfg.d)
        abs_k = np.sqrt(np.sum(k ** 2, axis=1))
    a = 4 * np.pi ** 2 * abs_k ** 2
    f = _amplitudes(abs_k, cfg.f_amplitude, cfg.f_decay)
    if not cfg.include_zero_mode:
        f = np.where(abs_k == 0, 0.0, f)
    prof = np.where(a == 0, t, -np.expm1(-a * t) / np.where(a == 0, 1.0, a))
    mean = f * prof
    if cfg.u0_amplitude and not cfg.u0_random:
        mean = mean + _amplitudes(abs_k, cfg.u0_amplitude, cfg.u0_decay) * np.exp(-a * t)
    return mean


def _block_weights(abs_k, sigma, bank: LPWindowBank):
    """``(blocks, modes)`` squared windows times ``2^(2 j sigma)``."""
    w = bank.evaluate(abs_k) ** 2
    return w * (2.0 ** (2 * sigma * np.arange(w.shape[0])))[:, None]


def spectral_besov_norm(coeffs, abs_k, multiplicity, sigma: float, q: float = 2.0,
                        bank: LPWindowBank | None = None, N: int | None = None, d: int = 1):
    """``B^sigma_{2,q}`` norm from half-lattice coefficients (Parseval per block)."""
    bank = bank or window_bank(N, d)
    windows = bank.evaluate(abs_k) ** 2 * multiplicity
    energy = np.abs(np.asarray(coeffs)) ** 2 @ windows.T            # (..., blocks)
    terms = np.sqrt(np.moveaxis(energy, -1, 0)) * (2.0 ** (sigma * np.arange(windows.shape[0])))[
        (slice(None),) + (None,) * (energy.ndim - 1)]
    return _lq_combine(terms, q)


def second_moment_oracle(cfg: HeatExperimentConfig, t: float, sigma: float, cutoff: float | None = None,
                         weights: str = "besov") -> float:
    """Closed-form ``E ||U(t)||^2`` in ``B^sigma_{2,2}`` (``weights="besov"``) or with
    Bessel weights ``(1+|k|^2)^sigma`` (``weights="bessel"``), summed over all
    integer frequencies up to ``cutoff``."""
    k, mult = half_lattice(cfg.modes, cfg.d)
    abs_k = np.sqrt(np.sum(k ** 2, axis=1))
    keep = abs_k <= (cfg.modes if cutoff is None else cutoff)
    abs_k, mult = abs_k[keep], mult[keep]
    second = mode_variance(cfg, t, abs_k) + np.abs(mode_mean(cfg, t, abs_k)) ** 2
    if weights == "bessel":
        w = (1 + abs_k ** 2) ** sigma
    else:
        w = _block_weights(abs_k, sigma, window_bank(cfg.N, cfg.d)).sum(axis=0)
    return float(np.sum(mult * w * second))


def _norms_at(ens: SolutionEnsemble, coeffs, sigma, p, q):
    cfg = ens.config
    if p == 2:
        return spectral_besov_norm(coeffs, ens.abs_k, ens.multiplicity, sigma, q,
                                   window_bank(cfg.N, cfg.d))
    return besov_norm(ens.grid_values(coeffs), sigma, p, q, d=cfg.d)


def measure_space_regularity(ens: SolutionEnsemble, sigma_list, p: float = 2.0, q: float = 2.0,
                             r: float = 2.0) -> list:
    """Rows ``{t, sigma, estimate, std_error}`` of ``(E ||U(t)||^r_{B^sigma_{p,q}})^(1/r)``."""
    rows = []
    for ti, t in enumerate(ens.times):
        for sigma in sigma_list:
            est = moment_estimate(_norms_at(ens, ens.coefficients[:, ti], sigma, p, q), r)
            rows.append({"t": float(t), "sigma": float(sigma), "estimate": est.value,
                         "std_error": est.std_error})
    return rows


def mode_cutoff_diagnostic(ens: SolutionEnsemble, sigma: float, cutoffs, t: float | None = None,
                           p: float = 2.0, q: float = 2.0, r: float = 2.0) -> list:
    """Norm versus frequency cutoff at fixed ``sigma`` (divergence diagnostic).

    The norms are recomputed from the truncated ensemble, with the
    closed-form second moment alongside.  ``relative_change`` compares the
    r-th moment with the previous cutoff.
    """
    t = ens.times[-1] if t is None else t
    ti = ens.time_index(t)
    rows, prev = [], None
    for c in cutoffs:
        sub = ens.truncated(c)
        est = moment_estimate(_norms_at(sub, sub.coefficients[:, ti], sigma, p, q), r)
        oracle = second_moment_oracle(ens.config, t, sigma, cutoff=c)
        row = {"cutoff": float(c), "estimate": est.value, "std_error": est.std_error,
               "moment": est.moment, "oracle_second_moment": oracle,
               "relative_change": None if prev is None else est.moment / prev - 1.0,
               "oracle_relative_change": None if not rows else oracle / rows[-1]["oracle_second_moment"] - 1.0}
        prev = est.moment
        rows.append(row)
    return rows


def hoelder_times(anchors, gaps, T: float) -> tuple:
    """Sorted union of ``{0, T}``, the anchors and ``anchor + gap``."""
    pts = {0.0, float(T)}
    for s in anchors:
        pts.add(float(s))
        for h in gaps:
            if s + h <= T:
                pts.add(float(s + h))
    return tuple(sorted(pts))


@dataclass
class HoelderFit:
    slope: float
    intercept: float
    rows: list
    warning: bool
    lam: float
    sigma: float


def measure_time_hoelder(ens: SolutionEnsemble, lam: float, sigma: float, r: float = 2.0,
                         anchors=None, gaps=None, p: float = 2.0, q: float = 2.0) -> HoelderFit:
    """Log-log slope of ``(E ||U(s+h) - U(s)||^r_{B^(sigma - 2 lam)})^(1/r)`` against ``h``.

    For each gap the values are averaged geometrically over the anchors
    before the fit.  ``warning`` is set when ``lam`` lies outside
    ``(0, alpha ^ beta]``, where no bound is claimed.
    """
    T = ens.times[-1]
    gaps = [T * 2.0 ** -e for e in range(12, 3, -1)] if gaps is None else list(gaps)
    anchors = [T / 4, T / 2] if anchors is None else list(anchors)
    cap = ens.config.exponent_cap()
    warning = not (0 < lam <= cap)
    rows = []
    for s in anchors:
        i0 = ens.time_index(s)
        for h in gaps:
            if h <= 0:
                rows.append({"anchor": s, "gap": 0.0, "estimate": 0.0, "std_error": 0.0})
                continue
            i1 = ens.time_index(s + h)
            inc = ens.coefficients[:, i1] - ens.coefficients[:, i0]
            est = moment_estimate(_norms_at(ens, inc, sigma - 2 * lam, p, q), r)
            rows.append({"anchor": float(s), "gap": float(h), "estimate": est.value,
                         "std_error": est.std_error})
    use = [row for row in rows if row["gap"] > 0 and row["estimate"] > 0]
    by_gap = {}
    for row in use:
        by_gap.setdefault(row["gap"], []).append(math.log(row["estimate"]))
    hs = np.log(np.array(sorted(by_gap)))
    vs = np.array([np.mean(by_gap[h]) for h in sorted(by_gap)])
    slope, intercept = (np.polyfit(hs, vs, 1) if hs.size >= 2 else (math.nan, math.nan))
    return HoelderFit(float(slope), float(intercept), rows, warning, lam, sigma)


def weighted_Lr_alpha_norm(edges, values, alpha: float, r: float, t: float | None = None) -> float:
    """``(int_0^t (t-s)^(-alpha r) ||f(s)||^r ds)^(1/r)`` for a cellwise constant trajectory.

    ``values[i]`` is the norm on ``[edges[i], edges[i+1])`` (e.g. sampled at
    the midpoint).  The singular weight is integrated exactly on every cell.
    Returns ``inf`` when ``alpha r >= 1`` and the last cell carries mass.
    """
    edges = np.asarray(edges, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if edges.size != values.size + 1 or np.any(np.diff(edges) <= 0):
        raise ValidationError("need increasing cell edges, one more than values")
    if r <= 0 or alpha < 0:
        raise ValidationError("need r > 0 and alpha >= 0")
    t = edges[-1] if t is None else float(t)
    if t < edges[-1] - 1e-15:
        raise ValidationError("t must not precede the last cell edge")
    e = 1.0 - alpha * r
    a, b = t - edges[:-1], t - edges[1:]
    if e <= 0:
        if values[-1] > 0 and np.isclose(t, edges[-1]):
            return math.inf
        cell_w = np.log(a / b) if e == 0 else (b ** e - a ** e) / (-e)
    else:
        cell_w = (a ** e - b ** e) / e
    total = float(np.sum(cell_w * values ** r))
    return total ** (1.0 / r)


def check_solution_identity(ens: SolutionEnsemble, test_modes, levels=None,
                            name: str = "weak formulation residual") -> CheckRecord:
    """Weak-form residual of the simulated solution against Fourier test modes.

    For ``phi = e_-k`` the identity reads
    ``c_k(T) - c_k(0) + a_k int c_k ds - f_k T - g_k W_k(T) = 0``.  The time
    integral is a trapezoid rule on the ensemble grid subsampled by powers
    of two; the stochastic term uses the retained increments.  PASS iff the
    L^2(Omega) residual decays with log-log slope >= 0.9 in the step, or is
    below 1e-12 at every level (as for the zero mode).
    """
    times = ens.times
    steps = np.diff(times)
    if not np.allclose(steps, steps[0]):
        raise ValidationError("the residual check needs a uniform time grid")
    n = steps.size
    max_level = int(round(math.log2(n)))
    if 2 ** max_level != n:
        raise ValidationError("number of time steps must be a power of two")
    levels = list(range(max(1, max_level - 4), max_level + 1)) if levels is None else list(levels)
    f, g = ens.flags["f"], ens.flags["g"]
    a = 4 * np.pi ** 2 * ens.abs_k ** 2
    W = ens.noise.sum(axis=1)
    T = times[-1] - times[0]
    rows, ok = [], True
    for km in test_modes:
        km = np.atleast_1d(np.asarray(km, dtype=int))
        hit = np.flatnonzero(np.all(ens.k == km, axis=1))
        if hit.size == 0:
            raise ValidationError(f"mode {km.tolist()} is not simulated")
        m = int(hit[0])
        c = ens.coefficients[:, :, m]
        res_norms, dts = [], []
        for lvl in levels:
            stride = n // 2 ** lvl
            sub = c[:, ::stride]
            dt = steps[0] * stride
            integral = dt * (sub[:, 1:-1].sum(axis=1) + (sub[:, 0] + sub[:, -1]) / 2)
            res = c[:, -1] - c[:, 0] + a[m] * integral - f[m] * T - g[m] * W[:, m]
            res_norms.append(float(np.sqrt(np.mean(np.abs(res) ** 2))))
            dts.append(dt)
        res_norms = np.array(res_norms)
        if np.all(res_norms <= 1e-12):
            slope, mode_ok = math.inf, True
        else:
            slope = float(np.polyfit(np.log(dts), np.log(np.maximum(res_norms, 1e-300)), 1)[0])
            mode_ok = slope >= 0.9
        ok &= mode_ok
        rows.append({"mode": km.tolist(), "slope": slope, "residuals": res_norms.tolist(), "steps": dts})
    finite = [row["slope"] for row in rows if math.isfinite(row["slope"])]
    return CheckRecord(
        name=name, anchor="weak formulation of the stochastic heat equation",
        estimate=min(finite) if finite else math.inf, bound=0.9, verdict=verdict(bool(ok)),
        method="monte-carlo", details={"rows": rows},
    )
