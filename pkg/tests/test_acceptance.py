"""The twelve acceptance criteria, each at its stated tolerance.

Every suite runs once with the packaged configuration and master seed; the
criteria read the resulting records.  Each test prints one PASS/FAIL line
(collected again in the terminal summary) and then asserts it.
"""

import math

import pytest

from qbstoch.report import PASS
from qbstoch.suites import SUITES, run_suite

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def reports():
    return {suite: run_suite(suite) for suite in SUITES}


def _records(report, prefix):
    return [r for r in report.records if r.name.startswith(prefix)]


def _timing(report, prefix):
    return sum(v for k, v in report.timings.items() if k == prefix or k.startswith(prefix + " "))


def _failures(records):
    return [f"{r.name}: {r.estimate:.6g} vs {r.bound:.6g}" for r in records if r.verdict != PASS]


def _finish(criterion, number, problems, summary):
    ok = not problems
    criterion(number, ok, summary if ok else f"{summary}; " + "; ".join(problems[:4]))
    assert ok, problems


def test_criterion_01_example_quadrature(reports, criterion):
    rep = reports["inequalities"]
    [x] = [r for r in rep.records if r.name == "example second moment of X"]
    [xy] = [r for r in rep.records if r.name == "example second moment of X+Y"]
    runtime = _timing(rep, "example quadrature")
    problems = []
    if abs(x.estimate - 1.0) > 1e-6:
        problems.append(f"E||X||^2 = {x.estimate:.9f}")
    if abs(xy.estimate - 0.987) > 0.002:
        problems.append(f"E||X+Y||^2 = {xy.estimate:.6f}")
    if runtime >= 1.0:
        problems.append(f"runtime {runtime:.2f} s")
    _finish(criterion, 1, problems,
            f"E||X||^2={x.estimate:.7f}, E||X+Y||^2={xy.estimate:.5f}, {runtime:.3f} s")


def test_criterion_02_enumeration_and_sharpness(reports, criterion):
    rep = reports["inequalities"]
    problems = []
    r = 0.5
    for p in (1, 2, 4):
        [single] = _records(rep, f"Rademacher single term p={p:g}")
        [pair] = _records(rep, f"Rademacher pair p={p:g}")
        [sharp] = _records(rep, f"symmetrization sharpness p={p:g}")
        if single.estimate != 2.0 ** (p / r):
            problems.append(f"single p={p}: {single.estimate!r}")
        if pair.estimate != 2.0 ** p:
            problems.append(f"pair p={p}: {pair.estimate!r}")
        constant = 2.0 ** ((1 - min(r, p)) / min(r, p))
        if not math.isclose(sharp.estimate, constant, rel_tol=1e-12) or sharp.verdict != PASS:
            problems.append(f"sharpness p={p}: {sharp.estimate!r} vs {constant}")
    _finish(criterion, 2, problems, "2^(p/r), 2^p exact and symmetrization constant attained, p=1,2,4")


def test_criterion_03_levy(reports, criterion):
    rep = reports["inequalities"]
    recs = _records(rep, "Levy maximal inequality")
    families = {r.name.split(" family ")[1].split(" ")[0] for r in recs}
    runtime = _timing(rep, "levy")
    problems = _failures(recs)
    if len(families) != 10 or len(recs) != 30:
        problems.append(f"{len(families)} families, {len(recs)} records")
    if rep.config["inequalities"]["levy_count"] != 100000:
        problems.append("sample count is not 1e5")
    if runtime >= 30.0:
        problems.append(f"runtime {runtime:.1f} s")
    _finish(criterion, 3, problems, f"{len(recs)} Levy records over {len(families)} families, {runtime:.1f} s")


def test_criterion_04_ito_isometry(reports, criterion):
    rep = reports["wiener"]
    recs = _records(rep, "Ito isometry")
    problems = [f"{r.name}: |{r.estimate:.5g} - {r.bound:.5g}| > 3 x {r.std_error:.3g}"
                for r in recs if abs(r.estimate - r.bound) > 3 * r.std_error]
    if len(recs) != 20 or rep.config["wiener"]["isometry_count"] != 100000:
        problems.append(f"{len(recs)} step functions")
    worst = max(abs(r.estimate - r.bound) / r.std_error for r in recs)
    _finish(criterion, 4, problems, f"20 step functions in l^2_8, worst |error|/SE = {worst:.2f}")


def test_criterion_05_gamma_sandwich_ideal_counterexample(reports, criterion):
    rep = reports["gamma"]
    sandwich = _records(rep, "gamma sandwich")
    ideal = _records(rep, "ideal property")
    [counter] = _records(rep, "contraction counterexample")
    proper = _records(rep, "matrix contraction")
    problems = _failures(sandwich + ideal + proper)
    if len(sandwich) != 180 or len(ideal) != 180:
        problems.append(f"{len(sandwich)} sandwich / {len(ideal)} ideal records (want 3 x 20 x 3)")
    if not counter.estimate > 1.0:
        problems.append(f"counterexample ratio {counter.estimate:.6g} <= 1")
    _finish(criterion, 5, problems,
            f"{len(sandwich)} sandwich + {len(ideal)} ideal PASS, counterexample ratio {counter.estimate:.5f}")


def test_criterion_06_square_function(reports, criterion):
    rep = reports["gamma"]
    hilbert = _records(rep, "square function l^2")
    brackets = _records(rep, "square-function bracket")
    problems = _failures(hilbert + brackets)
    for r in hilbert:
        d = r.details
        for key in ("basis", "sup"):
            if abs(d[key] - d["formula"]) > 3 * r.std_error:
                problems.append(f"{r.name} {key}")
    for r in brackets:
        lo, hi = r.details["bracket"]
        if not r.details["frozen"] or r.details["drift"] > 0.25:
            problems.append(f"{r.name}: drift {r.details['drift']:.3f}")
        if min(r.details["ratios_doubled"]) < lo / 1.25 or max(r.details["ratios_doubled"]) > hi * 1.25:
            problems.append(f"{r.name}: ratios leave the bracket")
    _finish(criterion, 6, problems,
            f"{len(hilbert)} Hilbert routes agree; brackets " +
            ", ".join(f"{r.details['bracket']}" for r in brackets) + " stable under doubling")


def test_criterion_07_decoupling_bdg_stopping(reports, criterion):
    rep = reports["adapted"]
    dec = _records(rep, "Gaussian decoupling")
    bdg = _records(rep, "one-sided BDG")
    stop = _records(rep, "stopped integral")
    problems = _failures(dec + bdg + stop)
    if len(dec) != 2 or len(bdg) != 2:
        problems.append("need p = 1 and p = 2")
    if any(r.details["constant_source"] != "configured" for r in dec + bdg):
        problems.append("constants are not the configured ones")
    if any(r.details.get("family_size", 12) != 12 for r in dec):
        problems.append("family size")
    worst = max(r.estimate for r in stop)
    if worst > 1e-12:
        problems.append(f"stopping error {worst:.3g}")
    _finish(criterion, 7, problems, f"decoupling and BDG at p=1,2 with configured constants; "
                                    f"stopping error {worst:.2g}")


def test_criterion_08_besov(reports, criterion):
    rep = reports["besov"]
    single = _records(rep, "single-mode Besov norm")
    smooth = _records(rep, "heat increment smoothing")
    point = _records(rep, "pointwise heat bound")
    problems = [f"{r.name}: rel error {abs(r.estimate - r.bound) / r.bound:.2g}"
                for r in single if abs(r.estimate - r.bound) > 1e-6 * r.bound]
    problems += [f"{r.name}: slope {r.estimate:.3f} < {r.bound:.3f}" for r in smooth if r.estimate < r.bound]
    for r in point:
        spread = r.details["spread"]
        if not spread < 2.0:
            problems.append(f"{r.name}: constants vary by x{spread:.3g}")
    if len(point) != 6 or len(smooth) != 3:
        problems.append(f"{len(point)} pointwise / {len(smooth)} smoothing records")
    slopes = ", ".join(f"{r.estimate:.3f}" for r in smooth)
    spreads = ", ".join(f"{r.details['spread']:.3g}" for r in point)
    _finish(criterion, 8, problems, f"{len(single)} single modes, smoothing slopes {slopes}, "
                                    f"pointwise spreads {spreads}")


def test_criterion_09_heat_oracle(reports, criterion):
    rep = reports["heat"]
    recs = _records(rep, "mode-sum oracle") + _records(rep, "single-mode second moment")
    problems = [f"{r.name}: {r.estimate:.5g} vs {r.bound:.5g} ({abs(r.estimate - r.bound) / r.std_error:.2f} SE)"
                for r in recs if r.std_error > 0 and abs(r.estimate - r.bound) > 3 * r.std_error]
    problems += _failures(recs)
    runtime = _timing(rep, "oracle")
    if runtime >= 60.0:
        problems.append(f"runtime {runtime:.1f} s")
    cfg = rep.config["heat"]
    if (cfg["oracle_count"], cfg["oracle_modes"]) != (200, 512):
        problems.append("configuration is not 200 paths x 512 modes")
    _finish(criterion, 9, sorted(set(problems)), f"{len(recs)} second moments within 3 SE, {runtime:.1f} s")


def test_criterion_10_regularity_threshold(reports, criterion):
    rep = reports["heat"]
    [sat] = _records(rep, "regularity threshold: saturation")
    [grow] = _records(rep, "regularity threshold: growth")
    problems = _failures([sat, grow])
    sizes = sat.details["grid_sizes"]
    late = [x for n, x in zip(sizes[1:], sat.details["mc_changes"]) if n > 256]
    if not late or max(abs(x) for x in late) >= 0.02:
        problems.append(f"saturation changes {late}")
    if min(grow.details["mc_changes"]) < 0.2 or min(grow.details["oracle_changes"]) < 0.2:
        problems.append(f"growth changes {[round(x, 4) for x in grow.details['mc_changes']]} "
                        f"(closed form {[round(x, 4) for x in grow.details['oracle_changes']]})")
    _finish(criterion, 10, problems,
            f"saturation change {sat.estimate:.4f} (< {sat.bound}), growth {grow.estimate:.4f} (>= {grow.bound})")


def test_criterion_11_hoelder(reports, criterion):
    rep = reports["heat"]
    recs = _records(rep, "time Hoelder slope")
    problems = [f"lambda={r.bound:g}: slope {r.estimate:.3f}" for r in recs if abs(r.estimate - r.bound) > 0.07]
    problems += _failures(recs)
    runtime = _timing(rep, "hoelder")
    if runtime >= 120.0:
        problems.append(f"runtime {runtime:.1f} s")
    slopes = ", ".join(f"lambda={r.bound:g}: {r.estimate:.3f}" for r in recs)
    _finish(criterion, 11, sorted(set(problems)), f"slopes {slopes}, {runtime:.1f} s")


def test_criterion_12_determinism(reports, criterion):
    problems = []
    for suite in SUITES:
        again = run_suite(suite, workers=4)
        if again.body_json() != reports[suite].body_json():
            problems.append(f"{suite} body differs")
    _finish(criterion, 12, problems, "all six report bodies byte-identical on rerun with 4 workers")
