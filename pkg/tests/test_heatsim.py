import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qbstoch.besovlp import besov_norm, heat_multiply
from qbstoch.errors import ValidationError
from qbstoch.heatsim import (HeatExperimentConfig, check_solution_identity, half_lattice,
                             hoelder_times, measure_space_regularity, measure_time_hoelder,
                             mode_cutoff_diagnostic, mode_mean, mode_variance, second_moment_oracle,
                             simulate_mild_solution, spectral_besov_norm, weighted_Lr_alpha_norm)
from qbstoch.report import PASS


def test_config_defaults_and_validation():
    cfg = HeatExperimentConfig()
    assert cfg.N == 256 and cfg.N / 3 > cfg.modes
    with pytest.raises(ValidationError):
        HeatExperimentConfig(times=(0.0, 0.3))
    with pytest.raises(ValidationError):
        HeatExperimentConfig(times=(0.5, 1.0))
    with pytest.raises(ValidationError):
        HeatExperimentConfig(modes=64, N=128)
    with pytest.raises(ValidationError):
        HeatExperimentConfig(d=3)


def test_white_noise_in_two_dimensions_rejected():
    with pytest.raises(ValidationError):
        HeatExperimentConfig(d=2, g_decay=0.0, modes=8)


@given(st.floats(0.0, 0.8), st.floats(0.05, 0.45), st.floats(0.05, 0.95))
def test_from_exponents_realizes_exponents(sigma, beta, alpha):
    cfg = HeatExperimentConfig.from_exponents(sigma, beta=beta, alpha=alpha, f_amplitude=1.0, modes=4)
    assert cfg.beta == pytest.approx(beta) and cfg.alpha == pytest.approx(alpha)
    assert cfg.exponent_cap() == pytest.approx(min(alpha, beta))


def test_exponent_cap_without_terms():
    assert HeatExperimentConfig(g_amplitude=0.0, modes=4).exponent_cap() == math.inf


@pytest.mark.parametrize("d", [1, 2])
def test_half_lattice_counts_every_frequency_once(d):
    k, mult = half_lattice(6, d)
    full = sum(mult)
    brute = sum(1 for v in np.ndindex(*(13,) * d) if np.linalg.norm(np.array(v) - 6) <= 6)
    assert full == brute


def test_homogeneous_problem_is_heat_semigroup():
    cfg = HeatExperimentConfig(modes=20, g_amplitude=0.0, u0_amplitude=1.0, count=2)
    ens = simulate_mild_solution(cfg)
    for t in cfg.times:
        ti = ens.time_index(t)
        evolved = heat_multiply(ens.field(0, 0.0), t)
        assert np.allclose(ens.field(0, t).values, evolved.values, atol=1e-14)
        assert np.array_equal(ens.coefficients[0, ti],
                              np.exp(-4 * np.pi ** 2 * ens.abs_k ** 2 * t) * ens.u0[0])


def test_off_grid_time_rejected():
    ens = simulate_mild_solution(HeatExperimentConfig(modes=4, count=2))
    with pytest.raises(ValidationError):
        ens.time_index(0.3)


def test_seed_determinism():
    cfg = HeatExperimentConfig(modes=8, count=5, seed=3)
    a = simulate_mild_solution(cfg).coefficients
    b = simulate_mild_solution(cfg).coefficients
    c = simulate_mild_solution(cfg.replace(seed=4)).coefficients
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("k", [1, 4, 16])
def test_mode_variance_matches_monte_carlo(k):
    cfg = HeatExperimentConfig(modes=16, count=4000, times=(0.0, 0.015625, 0.5))
    ens = simulate_mild_solution(cfg)
    idx = int(np.argmin(np.abs(ens.abs_k - k)))
    for t in cfg.times[1:]:
        c = ens.coefficients[:, ens.time_index(t), idx]
        sq = np.abs(c) ** 2
        oracle = mode_variance(cfg, t, np.array([float(k)]))[0]
        assert abs(sq.mean() - oracle) < 4 * sq.std() / math.sqrt(sq.size)


def test_forcing_mean_is_exact():
    cfg = HeatExperimentConfig(modes=6, f_amplitude=1.0, g_amplitude=0.0, count=1)
    ens = simulate_mild_solution(cfg)
    for t in cfg.times:
        assert np.allclose(ens.coefficients[0, ens.time_index(t)], mode_mean(cfg, t, ens.abs_k), atol=1e-15)


def test_spectral_norm_equals_grid_norm():
    cfg = HeatExperimentConfig(modes=30, count=3)
    ens = simulate_mild_solution(cfg)
    coeffs = ens.coefficients[:, -1]
    spec = spectral_besov_norm(coeffs, ens.abs_k, ens.multiplicity, 0.3, N=cfg.N)
    grid = besov_norm(ens.grid_values(coeffs), 0.3, 2.0, 2.0)
    assert np.allclose(spec, grid, rtol=1e-10)


def test_space_regularity_matches_oracle():
    cfg = HeatExperimentConfig(modes=128, count=400, times=(0.0, 0.5, 1.0))
    ens = simulate_mild_solution(cfg)
    for row in measure_space_regularity(ens, [0.0, 0.2], r=2.0):
        if row["t"] == 0:
            continue
        oracle = math.sqrt(second_moment_oracle(cfg, row["t"], row["sigma"]))
        assert abs(row["estimate"] - oracle) < 4 * row["std_error"]


def test_cutoff_diagnostic_saturates_below_threshold():
    cfg = HeatExperimentConfig(modes=512, count=50, times=(0.0, 1.0))
    rows = mode_cutoff_diagnostic(simulate_mild_solution(cfg), 0.2, [128, 256, 512])
    assert abs(rows[-1]["oracle_relative_change"]) < 0.02


def test_hoelder_slope_of_smooth_forcing():
    times = hoelder_times([0.25], [2.0 ** -e for e in range(4, 9)], 1.0)
    cfg = HeatExperimentConfig(modes=16, f_amplitude=1.0, g_amplitude=0.0, count=1, times=times)
    fit = measure_time_hoelder(simulate_mild_solution(cfg), 0.0, 0.0, anchors=[0.25],
                               gaps=[2.0 ** -e for e in range(4, 9)])
    assert fit.slope > 0.9
    assert fit.warning


def test_weighted_norm_closed_form():
    edges = np.linspace(0, 1, 1001)
    value = weighted_Lr_alpha_norm(edges, np.ones(1000), 0.3, 2.0)
    assert value == pytest.approx((1 / 0.4) ** 0.5, rel=1e-12)
    assert weighted_Lr_alpha_norm(edges, np.ones(1000), 0.6, 2.0) == math.inf


@pytest.mark.parametrize("f_amplitude", [0.0, 1.0])
def test_solution_identity(f_amplitude):
    steps = 2 ** 10
    cfg = HeatExperimentConfig(modes=4, f_amplitude=f_amplitude, count=100,
                               times=tuple(np.arange(steps + 1) / steps))
    rec = check_solution_identity(simulate_mild_solution(cfg), [0, 1, 2])
    assert rec.verdict == PASS


def test_table_export():
    ens = simulate_mild_solution(HeatExperimentConfig(modes=3, count=2, times=(0.0, 1.0)))
    assert ens.to_table().shape[0] == 2 * 2 * ens.k.shape[0]
