import math

import numpy as np

from qbstoch.report import FAIL, PASS, SKIP, CheckRecord, ExperimentReport, to_jsonable


def test_record_roundtrip_with_non_finite_values():
    rec = CheckRecord("x", "anchor", math.inf, math.nan, FAIL, details={"a": np.arange(3)})
    again = CheckRecord.from_dict(rec.to_dict())
    assert again.estimate == math.inf and math.isnan(again.bound)
    assert again.details["a"] == [0, 1, 2]
    assert not again and "[FAIL]" in again.line()


def test_report_json_roundtrip_and_body():
    rep = ExperimentReport("s", {"k": 1}, [CheckRecord("x", "a", 1.0, 2.0, PASS)],
                           seeds={"master": 1}, wall_clock=3.0, timings={"x": 0.1})
    again = ExperimentReport.from_json(rep.to_json())
    assert again.body_json() == rep.body_json()
    assert again.timings == {"x": 0.1} and again.wall_clock == 3.0
    assert "wall_clock" not in rep.body() and "timings" not in rep.body()
    assert rep.passed


def test_skip_is_not_a_failure_of_the_report():
    rep = ExperimentReport("s", {}, [CheckRecord("x", "a", math.nan, math.nan, SKIP)])
    assert rep.passed
    assert "0 failed" in rep.summary()


def test_to_jsonable_numpy_types():
    out = to_jsonable({"b": np.bool_(True), "i": np.int64(2), "f": np.float32(0.5), "t": (1, 2)})
    assert out == {"b": True, "i": 2, "f": 0.5, "t": [1, 2]}
