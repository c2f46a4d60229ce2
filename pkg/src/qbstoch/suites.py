"""Configuration-driven check suites.

A suite turns one section of the configuration into a list of
:class:`Task` objects; :func:`run_suite` executes them (optionally on a
thread pool sized by ``QBSTOCH_WORKERS``), merges the records in task order
and writes an append-only report.  Every task seed is derived from the
single master seed and the task key, so the report body is a pure function
of the configuration.
"""

from __future__ import annotations

import copy
import datetime as _dt
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import adapted, besovlp, gammaop, heatsim, randsum, rng, wiener
from .errors import CapacityError, ValidationError
from .qspace import ell, symmetrization_constant
from .report import SKIP, CheckRecord, ExperimentReport, verdict

__all__ = [
    "SUITES", "ConfigError", "Task", "default_config", "load_config", "parse_config", "quick_config",
    "build_tasks", "run_tasks", "run_suite", "write_report",
]

SUITES = ("inequalities", "gamma", "wiener", "adapted", "besov", "heat")
QUICK_COUNT_DIVISOR = 10
QUICK_TOL_FACTOR = 2.0


class ConfigError(ValidationError):
    """Configuration that does not parse or does not match the schema."""


@dataclass(frozen=True)
class Task:
    key: str
    func: Callable


# ---------------------------------------------------------------- configuration

def default_config() -> dict:
    text = resources.files("qbstoch").joinpath("data/default.toml").read_text()
    return tomllib.loads(text)


def _type_name(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, list):
        return "list"
    return type(value).__name__


def _merge(defaults: dict, user: dict, origin: str) -> dict:
    merged = copy.deepcopy(defaults)
    for section, body in user.items():
        if section not in defaults:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        for key, value in body.items():
            where = f"{origin}: field [{section}].{key}"
            if key not in defaults[section]:
                if section == "run" and key == "checks":
                    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                        raise ConfigError(f"{where} must be a list of task names")
                    merged[section][key] = value
                    continue
                raise ConfigError(f"{where} is not a known field")
            want, got = _type_name(defaults[section][key]), _type_name(value)
            if want != got:
                raise ConfigError(f"{where}: expected {want}, got {got}")
            if got == "list" and not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                         for v in value):
                raise ConfigError(f"{where}: list entries must be numbers")
            merged[section][key] = value
    return merged


def parse_config(text: str, origin: str = "config") -> dict:
    """Defaults overlaid by TOML ``text``; errors name the line or field."""
    try:
        user = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return _merge(default_config(), user, origin)


def load_config(source=None) -> dict:
    """Defaults overlaid by a TOML file (path) or a nested dict.

    Parse errors and schema violations raise :class:`ConfigError` naming the
    line or the offending field.
    """
    if source is None:
        return default_config()
    if isinstance(source, dict):
        return _merge(default_config(), source, "config")
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), str(path))


def quick_config(cfg: dict) -> dict:
    """Sample counts divided by 10, tolerances (``*_tol``) doubled."""
    out = copy.deepcopy(cfg)
    for body in out.values():
        for key, value in body.items():
            if key.endswith("count") and isinstance(value, int):
                body[key] = max(2, value // QUICK_COUNT_DIVISOR)
            elif key.endswith("_tol") and isinstance(value, (int, float)):
                body[key] = value * QUICK_TOL_FACTOR
    return out


# ---------------------------------------------------------------- helpers


def _single_mode_constant(p: float, points: int) -> float:
    """``||cos(2 pi x)||_p`` as a mean over ``points`` equispaced samples of one period.

    Equals the continuous ``(Gamma((p+1)/2) / (sqrt(pi) Gamma(p/2+1)))^(1/p)``
    for even ``p < 2 points``; for other ``p`` it is the exact grid value.
    """
    samples = np.abs(np.cos(2 * np.pi * np.arange(points) / points))
    return float(np.mean(samples ** p) ** (1 / p))


def _continuous_mode_constant(p: float) -> float:
    return (math.gamma((p + 1) / 2) / (math.sqrt(math.pi) * math.gamma(p / 2 + 1))) ** (1 / p)


def _random_field(N: int, seed: int, *path, decay: float = 1.0, band=None) -> besovlp.GridField:
    """Real random field with amplitudes ``(1+|k|)^-decay``.

    Band-limited below ``N / 3``, or supported in ``band = (low, high)``
    (``low <= |k| <= high``; the zero mode is then dropped).
    """
    g = rng.generator(seed, "field", *path)
    k = np.fft.fftfreq(N, 1.0 / N)
    spec = (g.standard_normal(N) + 1j * g.standard_normal(N)) * (1 + np.abs(k)) ** -decay
    if band is None:
        spec[np.abs(k) >= N / 3] = 0.0
        spec[0] = 1.0 + 0j
    else:
        spec[(np.abs(k) < band[0]) | (np.abs(k) > band[1])] = 0.0
    values = np.real(np.fft.ifft(spec * N))
    return besovlp.GridField(values, 1)


# ---------------------------------------------------------------- inequalities

EXAMPLE_SPACE = ell(0.5, 2)
EXAMPLE_X = np.array([1.0, 1.0]) / 4
EXAMPLE_Y = np.array([1.0, -1.0]) / 16
EXAMPLE_VALUE = 0.987


def _example_quadrature(c) -> list:
    nodes = c["quadrature_nodes"]
    single = randsum.quadrature_expectation_2d(EXAMPLE_X, np.zeros(2), 2.0, nodes, EXAMPLE_SPACE)
    pair = randsum.quadrature_expectation_2d(EXAMPLE_X, EXAMPLE_Y, 2.0, nodes, EXAMPLE_SPACE)
    return [
        CheckRecord("example second moment of X", "Gaussian second moment in l^1/2_2",
                    single, 1.0, verdict(abs(single - 1.0) <= c["unit_tol"]), method="quadrature",
                    details={"tol": c["unit_tol"], "nodes": nodes}),
        CheckRecord("example second moment of X+Y", "Gaussian second moment in l^1/2_2",
                    pair, EXAMPLE_VALUE, verdict(abs(pair - EXAMPLE_VALUE) <= c["example_tol"]),
                    method="quadrature", details={"tol": c["example_tol"], "nodes": nodes}),
    ]


def _enumeration(c) -> list:
    r = EXAMPLE_SPACE.r
    x, y = np.array([1.0, 1.0]), np.array([1.0, -1.0])
    records = []
    for p in c["enumeration_moments"]:
        single = randsum.rademacher_enumerate([x], p, EXAMPLE_SPACE)
        pair = randsum.rademacher_enumerate([x, y], p, EXAMPLE_SPACE)
        records.append(CheckRecord(f"Rademacher single term p={p:g}", "Rademacher moments in l^1/2_2",
                                   single, 2.0 ** (p / r), verdict(math.isclose(single, 2.0 ** (p / r), rel_tol=1e-12)),
                                   method="enumeration"))
        records.append(CheckRecord(f"Rademacher pair p={p:g}", "Rademacher moments in l^1/2_2",
                                   pair, 2.0 ** p, verdict(math.isclose(pair, 2.0 ** p, rel_tol=1e-12)),
                                   method="enumeration"))
        X = randsum.RandomSum(EXAMPLE_SPACE, [x], "rademacher", "x")
        Y = randsum.RandomSum(EXAMPLE_SPACE, [y], "rademacher", "y")
        sym = randsum.check_symmetrization(X, Y, p, 1, 0, method="exact",
                                           name=f"symmetrization p={p:g}")
        C = symmetrization_constant(r, p)
        records.append(sym)
        records.append(CheckRecord(f"symmetrization sharpness p={p:g}", "optimality of the symmetrization constant",
                                   sym.estimate, C, verdict(math.isclose(sym.estimate, C, rel_tol=1e-12)),
                                   method="enumeration"))
    X = randsum.RandomSum(EXAMPLE_SPACE, [EXAMPLE_X], "gauss", "x")
    Y = randsum.RandomSum(EXAMPLE_SPACE, [EXAMPLE_Y], "gauss", "y")
    records.append(randsum.check_symmetrization(X, Y, 2.0, 1, 0, method="exact",
                                                name="Gaussian symmetrization p=2"))
    return records


LEVY_SPACES = (ell(2, 8), ell(1, 4), ell(0.5, 4))


def _levy_family(c, seed, i):
    space = LEVY_SPACES[i % len(LEVY_SPACES)]
    g = rng.generator(seed, "levy-family", i)
    n = c["levy_summands"]
    scales = 1.0 / (1.0 + np.arange(n)) ** (0.5 + 0.5 * g.uniform())
    vectors = g.standard_normal((n,) + space.shape) * scales.reshape((n,) + (1,) * len(space.shape))
    kind = "gauss" if i % 2 == 0 else "rademacher"
    spec = randsum.RandomSum(space, vectors, kind, f"levy-{i}")
    pilot = randsum.batch_norms(space, spec.realize(spec.coefficients(4000, rng.derive_seed(seed, "pilot", i))))
    thresholds = np.quantile(pilot, np.linspace(0.05, 0.95, c["levy_thresholds"]))
    records = randsum.check_levy(spec, thresholds, c["levy_count"], seed)
    for rec in records:
        rec.name = f"{rec.name} family {i} ({space.label()}, {kind})"
    return records


def _kahane(c, seed):
    est = randsum.estimate_kahane_constant([np.ones(1)], 4.0, 2.0, c["kahane_count"], seed,
                                           space=ell(2, 1))
    target = 3.0 ** 0.25
    ok = abs(est.value - target) <= 3 * est.std_error
    return CheckRecord("Kahane ratio of a single Gaussian", "Kahane-Khintchine inequality",
                       est.value, target, verdict(ok), std_error=est.std_error)


def _inequality_tasks(c, seed):
    tasks = [Task("example quadrature", lambda: _example_quadrature(c)),
             Task("enumeration", lambda: _enumeration(c))]
    for i in range(c["levy_families"]):
        tasks.append(Task(f"levy {i}", lambda i=i: _levy_family(c, rng.derive_seed(seed, "levy", i), i)))
    tasks.append(Task("kahane", lambda: _kahane(c, rng.derive_seed(seed, "kahane"))))
    return tasks


# ---------------------------------------------------------------- gamma

GAMMA_SPACES = (ell(0.5, 4), ell(1, 4), ell(2, 8))


def _operators(c, seed, space, tag):
    return [gammaop.random_operator(space, c["rank"], c["hilbert_dim"], seed, tag, i)
            for i in range(c["operators_per_space"])]


def _sandwich_and_ideal(c, seed, space, i):
    R = gammaop.random_operator(space, c["rank"], c["hilbert_dim"], seed, "gamma", space.label(), i)
    g = rng.generator(seed, "ideal-maps", space.label(), i)
    U = g.standard_normal((space.size, space.size))
    V = g.standard_normal((R.hilbert_dim, R.hilbert_dim)) / math.sqrt(R.hilbert_dim)
    records = []
    for p in c["moments"]:
        s = rng.derive_seed(seed, "sandwich", space.label(), i, p)
        records.append(gammaop.check_gamma_sandwich(
            R, p, c["ons_trials"], c["sandwich_count"], s,
            name=f"gamma sandwich {space.label()} #{i} p={p:g}"))
        records.append(gammaop.check_ideal_property(
            U, R, V, p, c["ideal_count"], rng.derive_seed(seed, "ideal", space.label(), i, p),
            ons_trials=c["ons_trials"], name=f"ideal property {space.label()} #{i} p={p:g}"))
    return records


def _contraction(c, seed):
    A = np.array([[1.0, 0.0]])
    vecs = [EXAMPLE_X, EXAMPLE_Y]
    proper = gammaop.check_matrix_contraction(A, vecs, 2.0, 1, seed, EXAMPLE_SPACE, method="quadrature",
                                             name="matrix contraction, example pair")
    forced = gammaop.check_matrix_contraction(A, vecs, 2.0, 1, seed, EXAMPLE_SPACE, constant=1.0,
                                             method="quadrature")
    counter = CheckRecord(
        "contraction counterexample with constant 1", "contraction of Gaussian sums by matrices",
        forced.estimate, 1.0, verdict(forced.estimate > 1.0), method="quadrature",
        details={"inner_verdict": forced.verdict, "expected_ratio": 1 / math.sqrt(EXAMPLE_VALUE)})
    R = gammaop.random_operator(ell(0.5, 4), 3, 5, seed, "contraction")
    A2 = rng.generator(seed, "contraction-matrix").standard_normal((4, 3))
    mc = gammaop.check_matrix_contraction(A2, R.vectors, 1.0, c["contraction_count"],
                                          rng.derive_seed(seed, "mc"), ell(0.5, 4),
                                          name="matrix contraction, random l^1/2_4 system")
    return [proper, counter, mc]


def _square_hilbert(c, seed):
    ops = _operators(c, seed, ell(2, 8), "square-hilbert")
    return [gammaop.check_square_function_hilbert(
        R, c["hilbert_count"], rng.derive_seed(seed, "sq-h", i), c["ons_trials"],
        name=f"square function l^2_8 #{i}") for i, R in enumerate(ops)]


def _square_bracket(c, seed, space, bracket_key):
    ops = _operators(c, seed, space, f"square-{space.label()}")
    bracket = c[bracket_key] if c[bracket_key] else None
    return gammaop.check_square_function_bracket(
        ops, 2.0, c["square_count"], seed, bracket=bracket, stability=c["bracket_stability"],
        name=f"square-function bracket {space.label()}")


def _gamma_tasks(c, seed):
    tasks = []
    for space in GAMMA_SPACES:
        for i in range(c["operators_per_space"]):
            tasks.append(Task(f"sandwich {space.label()} {i}",
                              lambda space=space, i=i: _sandwich_and_ideal(c, seed, space, i)))
    tasks.append(Task("contraction", lambda: _contraction(c, rng.derive_seed(seed, "contraction"))))
    tasks.append(Task("square hilbert", lambda: _square_hilbert(c, seed)))
    tasks.append(Task("square bracket quasi",
                      lambda: _square_bracket(c, rng.derive_seed(seed, "bq"), ell(0.5, 4), "bracket_quasi")))
    tasks.append(Task("square bracket l3",
                      lambda: _square_bracket(c, rng.derive_seed(seed, "b3"), ell(3, 4), "bracket_l3")))
    return tasks


# ---------------------------------------------------------------- wiener

def _isometry(c, seed, i):
    phi = wiener.random_step_function(ell(2, 8), c["cells"], c["ons_size"], c["hilbert_dim"], seed, "iso", i)
    return wiener.check_ito_isometry(phi, c["isometry_count"], rng.derive_seed(seed, "iso-paths", i),
                                     name=f"Ito isometry l^2_8 #{i}")


def _wiener_bounds(c, seed, space, i):
    phi = wiener.random_step_function(space, c["cells"], c["ons_size"], c["hilbert_dim"], seed,
                                      "bounds", space.label(), i)
    out = []
    for p in (1.0, 2.0):
        s = rng.derive_seed(seed, "bounds", space.label(), i, p)
        out.append(wiener.check_ito_bounds(phi, p, c["bound_count"], s,
                                           name=f"Ito sandwich {space.label()} #{i} p={p:g}"))
        out.append(wiener.check_sup_bound(phi, p, c["bound_count"], s, level=c["sup_level"],
                                          name=f"maximal bound {space.label()} #{i} p={p:g}"))
    out.append(wiener.check_series_expansion(phi, c["series_count"], rng.derive_seed(seed, "series", i),
                                             name=f"series expansion {space.label()} #{i}"))
    return out


def _wiener_tasks(c, seed):
    tasks = [Task(f"isometry {i}", lambda i=i: _isometry(c, seed, i)) for i in range(c["step_functions"])]
    for space in GAMMA_SPACES:
        for i in range(c["bound_functions"]):
            tasks.append(Task(f"bounds {space.label()} {i}",
                              lambda space=space, i=i: _wiener_bounds(c, seed, space, i)))
    return tasks


# ---------------------------------------------------------------- adapted

ADAPTED_SPACE = ell(0.5, 4)


def _family(c, seed):
    return adapted.sign_rule_family(ADAPTED_SPACE, c["family_size"], rng.derive_seed(seed, "family"))


def _decoupling(c, seed, p):
    constant = c["decoupling_constant"] or None
    return adapted.check_decoupling(_family(c, seed), p, c["count"], rng.derive_seed(seed, "dec", p),
                                    constant=constant, level=c["level"],
                                    name=f"Gaussian decoupling p={p:g}")


def _bdg(c, seed, p):
    constant = c["bdg_constant"] or None
    return adapted.check_bdg(_family(c, seed), p, c["count"], rng.derive_seed(seed, "bdg", p),
                             constant=constant, level=c["level"], inner=c["bdg_inner"],
                             name=f"one-sided BDG p={p:g}")


def _stopping(c, seed):
    records = []
    for i, phi in enumerate(_family(c, seed)):
        noise = adapted.NoiseRecord.draw(rng.derive_seed(seed, "stop", i), phi.partition, phi.K,
                                         c["stop_count"], f"stop-{i}")
        for rule, tag in ((adapted.FirstHittingRule(1.0), "first hitting"),
                          (adapted.FixedStopRule(2), "fixed index")):
            records.append(adapted.stopped_integral(phi, noise, rule,
                                                    name=f"stopped integral #{i} ({tag})"))
    return records


def _approximation(c, seed):
    g = rng.generator(seed, "approximation")
    count, F, M = c["approximation_count"], 2 ** 8, 3
    t = (np.arange(F) + 0.5) / F
    phase = g.uniform(0, 2 * np.pi, (count, 1, 1, 1))
    x = g.standard_normal((1, 1, M) + ADAPTED_SPACE.shape)
    kernel = np.cos(2 * np.pi * t[None, :, None, None] + phase) * x
    levels = [2, 3, 4, 5, 6]
    dist = [adapted.approximate_adapted(kernel, ADAPTED_SPACE, K=2, L=L, mc_count=500,
                                        seed=seed).projection_distance for L in levels]
    ratios = [b / a for a, b in zip(dist, dist[1:]) if a > 0]
    ok = bool(ratios) and max(ratios) <= 0.6
    return CheckRecord("Haar projection of adapted kernels", "approximation of adapted integrands by elementary ones",
                       max(ratios) if ratios else math.nan, 0.6, verdict(ok),
                       details={"levels": levels, "projection_distance": dist})


def _adapted_tasks(c, seed):
    tasks = []
    for p in c["moments"]:
        tasks.append(Task(f"decoupling {p:g}", lambda p=p: _decoupling(c, seed, p)))
        tasks.append(Task(f"bdg {p:g}", lambda p=p: _bdg(c, seed, p)))
    tasks.append(Task("stopping", lambda: _stopping(c, seed)))
    tasks.append(Task("approximation", lambda: _approximation(c, rng.derive_seed(seed, "approx"))))
    return tasks


# ---------------------------------------------------------------- besov

def _single_modes(c):
    N = c["N"]
    bank = besovlp.window_bank(N, 1)
    records = []
    for m in c["single_modes"]:
        if 2 ** m >= N / 3:
            raise CapacityError(f"mode 2^{m} is not representable on N={N}")
        f = besovlp.GridField.from_function(lambda x, m=m: np.cos(2 * np.pi * 2 ** m * x), N)
        for sigma in c["single_sigmas"]:
            for p in c["single_moments"]:
                value = float(besovlp.besov_norm(f, sigma, p, 2.0, bank))
                target = 2 ** (m * sigma) * _single_mode_constant(p, N >> m)
                records.append(CheckRecord(
                    f"single-mode Besov norm m={m} sigma={sigma:g} p={p:g}", "Besov norm of a dyadic mode",
                    value, target, verdict(abs(value - target) <= c["single_tol"]), method="exact",
                    details={"continuous_value": 2 ** (m * sigma) * _continuous_mode_constant(p)}))
    return records


def _smoothing(c, seed):
    f = _random_field(c["N"], seed, "smoothing", decay=c["smoothing_decay"])
    pairs = [(0.0, h) for h in np.logspace(-6, -3, 7)]
    return [besovlp.check_besov_smoothing(f, c["smoothing_sigma"], lam, pairs, slope_tol=c["slope_tol"],
                                          name=f"heat increment smoothing lambda={lam:g}")
            for lam in c["smoothing_lambdas"]]


def _pointwise(c, seed, alpha, r):
    f = _random_field(c["N"], seed, "pointwise", band=c["pointwise_band"])
    return besovlp.check_pointwise_heat_bound(f, alpha, r, c["pointwise_times"],
                                              name=f"pointwise heat bound alpha={alpha:g} r={r:g}")


def _maximal(c, seed):
    def family(N):
        return [_random_field(N, seed, "fs", j) for j in range(4)]
    return besovlp.check_fefferman_stein(family, 2.0, 2.0, 0.5, N=c["maximal_N"])


def _besov_tasks(c, seed):
    fseed = rng.derive_seed(seed, "fields", c["field_seed"])
    tasks = [Task("single modes", lambda: _single_modes(c)),
             Task("smoothing", lambda: _smoothing(c, fseed))]
    for alpha in c["pointwise_alphas"]:
        for r in c["pointwise_r"]:
            tasks.append(Task(f"pointwise {alpha:g} {r:g}", lambda a=alpha, r=r: _pointwise(c, fseed, a, r)))
    tasks.append(Task("maximal", lambda: _maximal(c, fseed)))
    return tasks


# ---------------------------------------------------------------- heat

def _second_moment(values):
    sq = np.asarray(values, dtype=float) ** 2
    se = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.inf
    return float(sq.mean()), se


def _oracle(c, seed):
    cfg = heatsim.HeatExperimentConfig(modes=c["oracle_modes"], times=tuple(c["oracle_times"]), sigma=0.4,
                                       count=c["oracle_count"], seed=seed)
    ens = heatsim.simulate_mild_solution(cfg)
    bank = besovlp.window_bank(cfg.N, cfg.d)
    records = []
    for ti, t in enumerate(ens.times):
        for sigma in c["oracle_sigmas"]:
            norms = heatsim.spectral_besov_norm(ens.coefficients[:, ti], ens.abs_k, ens.multiplicity,
                                                sigma, 2.0, bank)
            mean, se = _second_moment(norms)
            oracle = heatsim.second_moment_oracle(cfg, t, sigma)
            ok = abs(mean - oracle) <= 3 * se
            records.append(CheckRecord(f"mode-sum oracle t={t:g} sigma={sigma:g}",
                                       "second moment of the stochastic heat equation",
                                       mean, oracle, verdict(ok), std_error=se))
    T = ens.times[-1]
    var = heatsim.mode_variance(cfg, T)
    for kk in c["oracle_single_modes"]:
        m = int(np.flatnonzero(ens.k[:, 0] == kk)[0])
        mean, se = _second_moment(np.abs(ens.coefficients[:, -1, m]))
        records.append(CheckRecord(f"single-mode second moment k={kk}", "second moment of the stochastic heat equation",
                                   mean, float(var[m]), verdict(abs(mean - var[m]) <= 3 * se), std_error=se))
    return records


def _threshold(c, seed):
    cfg = heatsim.HeatExperimentConfig(modes=c["threshold_modes"], times=(0.0, 1.0), sigma=0.4,
                                       count=c["threshold_count"], seed=seed)
    ens = heatsim.simulate_mild_solution(cfg)
    cutoffs = c["threshold_cutoffs"]
    records = []
    for sigma, saturate in ((c["saturation_sigma"], True), (c["growth_sigma"], False)):
        rows = heatsim.mode_cutoff_diagnostic(ens, sigma, cutoffs)
        mc = [row["relative_change"] for row in rows[1:]]
        oracle = [row["oracle_relative_change"] for row in rows[1:]]
        agree = all(abs(row["moment"] - row["oracle_second_moment"]) <= 3 * 2 * row["estimate"] * row["std_error"]
                    for row in rows)
        if saturate:
            worst = max(abs(x) for x in mc)
            ok = worst < c["saturation_tol"] and max(abs(x) for x in oracle) < c["saturation_tol"] and agree
            name, bound = f"regularity threshold: saturation at sigma={sigma:g}", c["saturation_tol"]
        else:
            worst = min(mc)
            ok = worst >= c["growth_min"] and min(oracle) >= c["growth_min"] and agree
            name, bound = f"regularity threshold: growth at sigma={sigma:g}", c["growth_min"]
        records.append(CheckRecord(
            name, "spatial regularity threshold of the stochastic heat equation", worst, bound, verdict(ok),
            details={"grid_sizes": [2 * x for x in cutoffs], "rows": rows, "mc_changes": mc,
                     "oracle_changes": oracle, "oracle_agreement": agree}))
    return records


def _hoelder(c, seed, lam):
    T = 1.0
    gaps = [T * 2.0 ** -e for e in range(c["hoelder_max_exp"], c["hoelder_min_exp"] - 1, -1)]
    anchors = [a * T for a in c["hoelder_anchors"]]
    cfg = heatsim.HeatExperimentConfig.from_exponents(
        c["hoelder_sigma"], beta=c["hoelder_beta"], modes=c["hoelder_modes"],
        times=heatsim.hoelder_times(anchors, gaps, T), count=c["hoelder_count"], seed=seed)
    ens = heatsim.simulate_mild_solution(cfg)
    fit = heatsim.measure_time_hoelder(ens, lam, c["hoelder_sigma"], 2.0, anchors, gaps)
    ok = abs(fit.slope - lam) <= c["hoelder_tol"]
    return CheckRecord(
        f"time Hoelder slope lambda={lam:g}", "time regularity of the stochastic heat equation in Besov spaces",
        fit.slope, lam, verdict(ok),
        details={"tol": c["hoelder_tol"], "warning": fit.warning, "beta": cfg.beta, "g_decay": cfg.g_decay,
                 "sigma": c["hoelder_sigma"], "intercept": fit.intercept, "rows": fit.rows})


def _identity(c, seed):
    n = 2 ** c["identity_levels"]
    cfg = heatsim.HeatExperimentConfig(modes=c["identity_modes"], times=tuple(np.arange(n + 1) / n),
                                       count=c["identity_count"], seed=seed, f_amplitude=1.0, f_decay=2.0)
    ens = heatsim.simulate_mild_solution(cfg)
    return heatsim.check_solution_identity(ens, [[k] for k in c["identity_test_modes"]])


def _weighted(c):
    alpha, r, n = c["weighted_alpha"], c["weighted_r"], c["weighted_cells"]
    t = 1.0
    value = heatsim.weighted_Lr_alpha_norm(np.linspace(0, t, n + 1), np.ones(n), alpha, r, t)
    closed = t ** (1 / r - alpha) * (1 - alpha * r) ** (-1 / r)
    return CheckRecord("weighted norm of a constant trajectory", "embedding of bounded functions into weighted L^r",
                       value, closed, verdict(abs(value / closed - 1) <= c["weighted_tol"]), method="quadrature")


def _heat_tasks(c, seed):
    tasks = [Task("oracle", lambda: _oracle(c, rng.derive_seed(seed, "oracle"))),
             Task("threshold", lambda: _threshold(c, rng.derive_seed(seed, "threshold")))]
    for lam in c["hoelder_lambdas"]:
        tasks.append(Task(f"hoelder {lam:g}", lambda lam=lam: _hoelder(c, rng.derive_seed(seed, "hoelder"), lam)))
    tasks.append(Task("identity", lambda: _identity(c, rng.derive_seed(seed, "identity"))))
    tasks.append(Task("weighted", lambda: _weighted(c)))
    return tasks


_BUILDERS = {
    "inequalities": _inequality_tasks, "gamma": _gamma_tasks, "wiener": _wiener_tasks,
    "adapted": _adapted_tasks, "besov": _besov_tasks, "heat": _heat_tasks,
}


# ---------------------------------------------------------------- running

def build_tasks(suite: str, cfg: dict, seed: int) -> list:
    if suite not in _BUILDERS:
        raise ValidationError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    tasks = _BUILDERS[suite](cfg[suite], rng.derive_seed(seed, suite))
    wanted = cfg.get("run", {}).get("checks")
    if wanted is not None and "*" not in wanted:
        tasks = [t for t in tasks if any(t.key == w or t.key.startswith(w + " ") for w in wanted)]
    return tasks


def _execute(task: Task):
    start = time.perf_counter()
    try:
        out = task.func()
        records = out if isinstance(out, list) else [out]
    except CapacityError as exc:
        records = [CheckRecord(task.key, "capacity limit", math.nan, math.nan, SKIP, method="skipped",
                               details={"reason": str(exc)})]
    return records, time.perf_counter() - start


def run_tasks(tasks, workers: int | None = None):
    """Records in task order and per-task timings."""
    workers = workers or int(os.environ.get("QBSTOCH_WORKERS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    records, timings = [], {}
    for task, (recs, elapsed) in zip(tasks, results):
        records.extend(recs)
        timings[task.key] = elapsed
    return records, timings


def run_suite(suite: str, config=None, out_dir=None, seed: int | None = None, quick: bool = False,
              workers: int | None = None, emit_plots: bool = True) -> ExperimentReport:
    """Run one suite (or ``"all"``) and, with ``out_dir``, persist the report."""
    cfg = config if isinstance(config, dict) and "run" in config else load_config(config)
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg["run"]["seed"] = int(seed)
    if quick:
        cfg = quick_config(cfg)
    master = int(cfg["run"]["seed"])
    names = SUITES if suite == "all" else (suite,)
    start = time.perf_counter()
    tasks = []
    for name in names:
        tasks.extend(build_tasks(name, cfg, master))
    records, timings = run_tasks(tasks, workers)
    snapshot = {"run": cfg["run"], **{n: cfg[n] for n in names}, "quick": quick}
    report = ExperimentReport(suite=suite, config=snapshot, records=records,
                              seeds={"master": master, **{n: rng.derive_seed(master, n) for n in names}},
                              wall_clock=time.perf_counter() - start, timings=timings)
    if out_dir is not None:
        path = write_report(report, out_dir)
        if emit_plots:
            from .plotdata import emit_all
            emit_all(report, path.with_suffix(""))
    return report


def write_report(report: ExperimentReport, out_dir) -> Path:
    """Write ``<suite>-<UTC timestamp>.json``; never overwrites an existing file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    base = re.sub(r"[^A-Za-z0-9_-]", "_", report.suite)
    for n in range(1000):
        path = out / (f"{base}-{stamp}.json" if n == 0 else f"{base}-{stamp}-{n}.json")
        try:
            with open(path, "x") as fh:
                fh.write(report.to_json())
            return path
        except FileExistsError:
            continue
    raise CapacityError("could not find a fresh report file name")
