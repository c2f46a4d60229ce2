import json
import subprocess
import sys

import pytest

from qbstoch.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from qbstoch.report import ExperimentReport, PASS
from qbstoch.suites import (SUITES, ConfigError, build_tasks, default_config, load_config, parse_config,
                            quick_config, run_suite)


def _subset(suite, *checks, **overrides):
    cfg = load_config()
    cfg["run"]["checks"] = list(checks)
    for key, value in overrides.items():
        section, name = key.split("__")
        cfg[section][name] = value
    return cfg


def test_default_config_covers_every_suite():
    cfg = default_config()
    assert set(SUITES) <= set(cfg)
    for suite in SUITES:
        assert build_tasks(suite, cfg, 1)


@pytest.mark.parametrize("text, fragment", [
    ("[gamma]\nbogus = 1\n", "[gamma].bogus"),
    ("[heat]\noracle_count = 'many'\n", "[heat].oracle_count"),
    ("[nosuch]\nx = 1\n", "nosuch"),
    ("[run]\nseed = \n", "line 2"),
])
def test_config_errors_name_the_field(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "user.toml")
    assert fragment in str(exc.value)


def test_partial_config_merges_with_defaults(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[run]\nseed = 7\n")
    cfg = load_config(path)
    assert cfg["run"]["seed"] == 7
    assert cfg["gamma"] == default_config()["gamma"]


def test_quick_mode_scales_counts_and_tolerances():
    cfg, quick = default_config(), quick_config(default_config())
    assert quick["gamma"]["sandwich_count"] == cfg["gamma"]["sandwich_count"] // 10
    assert quick["heat"]["hoelder_tol"] == 2 * cfg["heat"]["hoelder_tol"]
    assert quick["besov"]["N"] == cfg["besov"]["N"]


def test_empty_check_list_gives_empty_report():
    report = run_suite("gamma", _subset("gamma"))
    assert report.records == []


def test_check_filter_selects_prefix():
    tasks = build_tasks("inequalities", _subset("inequalities", "levy"), 1)
    assert tasks and all(t.key.startswith("levy ") for t in tasks)


def test_seed_determinism_and_worker_independence():
    cfg = _subset("inequalities", "example quadrature", "enumeration", "kahane")
    a = run_suite("inequalities", cfg, seed=5)
    b = run_suite("inequalities", cfg, seed=5, workers=4)
    c = run_suite("inequalities", cfg, seed=6)
    assert a.body_json() == b.body_json()
    assert a.body_json() != c.body_json()
    assert a.seeds["master"] == 5


def test_reports_are_append_only(tmp_path):
    cfg = _subset("heat", "weighted")
    run_suite("heat", cfg, tmp_path)
    run_suite("heat", cfg, tmp_path)
    files = sorted(tmp_path.glob("heat-*.json"))
    assert len(files) == 2
    report = ExperimentReport.from_json(files[0].read_text())
    assert report.records[0].verdict == PASS and report.timings


def _write_cfg(tmp_path, checks, extra=""):
    path = tmp_path / "cfg.toml"
    path.write_text(f"[run]\nchecks = {json.dumps(checks)}\n{extra}")
    return str(path)


def test_cli_exit_codes(tmp_path, capsys):
    ok = main(["run", "heat", "--config", _write_cfg(tmp_path, ["weighted"]), "--out", str(tmp_path)])
    assert ok == EXIT_OK
    failing = main(["run", "besov", "--config", _write_cfg(tmp_path, ["pointwise 0"]),
                    "--out", str(tmp_path)])
    assert failing == EXIT_FAILED
    bad = tmp_path / "bad.toml"
    bad.write_text("[heat]\nweighted_alpha = 'x'\n")
    assert main(["run", "heat", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "weighted_alpha" in capsys.readouterr().err


def test_cli_quick_seed_and_default_config(tmp_path, capsys):
    code = main(["run", "inequalities", "--config", _write_cfg(tmp_path, ["example quadrature"]),
                 "--out", str(tmp_path), "--seed", "3", "--quick"])
    assert code == EXIT_OK
    report = ExperimentReport.from_json(next(tmp_path.glob("inequalities-*.json")).read_text())
    assert report.config["quick"] and report.seeds["master"] == 3
    capsys.readouterr()
    assert main(["default-config"]) == EXIT_OK
    assert parse_config(capsys.readouterr().out) == default_config()


def test_cli_rejects_unknown_suite(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "nosuch", "--out", str(tmp_path)])


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qbstoch", "run", "heat", "--config",
                          _write_cfg(tmp_path, ["weighted"]), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "heat: 1 checks, 0 failed" in out.stdout
