"""Check records and experiment reports.

A :class:`CheckRecord` is what every ``check_*`` routine returns; an
:class:`ExperimentReport` bundles the records of one suite run together with
the configuration snapshot and seeds needed to reproduce it.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .rng import GENERATOR_ID

__all__ = ["CheckRecord", "ExperimentReport", "PASS", "FAIL", "SKIP", "to_jsonable"]

PASS = "PASS"
FAIL = "FAIL"
SKIP = "SKIP"


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _from_jsonable(x):
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if x == "nan":
        return math.nan
    return x


@dataclass
class CheckRecord:
    """Outcome of one inequality or regularity check.

    ``anchor`` names the inequality or identity being tested (it is what a
    FAIL points the reader to); ``method`` says how the estimate was
    obtained (``"monte-carlo"``, ``"quadrature"``, ``"enumeration"``,
    ``"closed-form"``, ``"exact"``).
    """

    name: str
    anchor: str
    estimate: float
    bound: float
    verdict: str
    std_error: float = 0.0
    method: str = "monte-carlo"
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def __bool__(self) -> bool:
        return self.passed

    def line(self) -> str:
        return (f"[{self.verdict}] {self.name}: estimate={self.estimate:.6g} "
                f"(se {self.std_error:.2g}) bound={self.bound:.6g} -- {self.anchor}")

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "CheckRecord":
        data = dict(data)
        for key in ("estimate", "bound", "std_error"):
            data[key] = _from_jsonable(data[key])
        return cls(**data)


def verdict(ok: bool) -> str:
    return PASS if ok else FAIL


@dataclass
class ExperimentReport:
    suite: str
    config: dict
    records: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__
    generator: str = GENERATOR_ID
    domain_note: str = ("fields live on the periodic unit torus; L^r(R^d) is represented by "
                        "uniform-cell Riemann sums on that torus")
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict != FAIL for r in self.records)

    def body(self) -> dict:
        """Everything except the wall-clock and timing fields."""
        return {
            "suite": self.suite,
            "version": self.version,
            "generator": self.generator,
            "domain_note": self.domain_note,
            "config": to_jsonable(self.config),
            "seeds": to_jsonable(self.seeds),
            "records": [r.to_dict() for r in self.records],
        }

    def body_json(self) -> str:
        return json.dumps(self.body(), sort_keys=True, indent=1)

    def to_json(self) -> str:
        data = self.body()
        data["wall_clock"] = self.wall_clock
        data["timings"] = to_jsonable(self.timings)
        return json.dumps(data, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        data = json.loads(text)
        return cls(
            suite=data["suite"],
            config=data["config"],
            records=[CheckRecord.from_dict(r) for r in data["records"]],
            seeds=data["seeds"],
            wall_clock=data.get("wall_clock", 0.0),
            version=data["version"],
            generator=data["generator"],
            domain_note=data["domain_note"],
            timings=data.get("timings", {}),
        )

    def summary(self) -> str:
        lines = [r.line() for r in self.records]
        n_fail = sum(r.verdict == FAIL for r in self.records)
        lines.append(f"{self.suite}: {len(self.records)} checks, {n_fail} failed")
        return "\n".join(lines)


def dump_details(**kwargs: Any) -> dict:
    return to_jsonable(kwargs)
