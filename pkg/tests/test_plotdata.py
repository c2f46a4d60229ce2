import numpy as np
import pytest

from qbstoch.besovlp import GridField
from qbstoch.errors import ValidationError
from qbstoch.plotdata import emit_all, emit_plot_data
from qbstoch.report import CheckRecord, ExperimentReport


def _report():
    slope = CheckRecord("time slope", "a", 0.5, 0.4, "PASS",
                        details={"gaps": [0.0, 0.1, 0.01, 0.001], "values": [0.0, 1.0, 0.3, 0.1]})
    sandwich = CheckRecord("sandwich #0", "b", 1.2, 2.0, "PASS",
                           details={"lower": 1.0, "upper": 2.0, "sup": 1.2})
    return ExperimentReport("demo", {}, [slope, sandwich])


def test_slope_table(tmp_path):
    [path] = emit_plot_data(_report(), "slope", tmp_path)
    text = path.read_text()
    assert "loglog=true" in text and "fit: log y" in text
    data = np.loadtxt(path, delimiter=",")
    assert data.shape == (3, 3)
    slope = float(text.split("fit: log y = ")[1].split()[0])
    assert slope == pytest.approx(np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)[0])


def test_sandwich_table(tmp_path):
    [path] = emit_plot_data(_report(), "sandwich", tmp_path)
    assert np.allclose(np.loadtxt(path, delimiter=","), [1, 1.0, 1.2, 2.0])
    assert len(emit_all(_report(), tmp_path / "all")) == 2


def test_spectrum_table(tmp_path):
    f = GridField(np.cos(2 * np.pi * 3 * np.arange(16) / 16))
    [path] = emit_plot_data(f, "spectrum", tmp_path)
    data = np.loadtxt(path, delimiter=",")
    assert data[np.argmax(data[:, 1]), 0] == 3.0


def test_missing_series_and_bad_kind(tmp_path):
    empty = ExperimentReport("none", {}, [CheckRecord("x", "a", 1.0, 1.0, "PASS")])
    with pytest.raises(ValidationError):
        emit_plot_data(empty, "slope", tmp_path)
    with pytest.raises(ValidationError):
        emit_plot_data(empty, "histogram", tmp_path)
    with pytest.raises(ValidationError):
        emit_plot_data(empty, "spectrum", tmp_path)
