"""Run reports: check records that carry their tolerance and exactness, canonical JSON output."""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field

from . import __version__
from .config import SCHEMA_VERSION


def _clean(obj):
    """Make ``obj`` JSON-ready: tuples to lists, numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class Check:
    name: str
    inputs: dict
    value: object
    tolerance: float | int | None
    relation: str
    exact: bool
    passed: bool

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "inputs": self.inputs,
            "value": self.value,
            "tolerance": self.tolerance,
            "relation": self.relation,
            "exact": self.exact,
            "passed": self.passed,
        })


def check_le(name, value, tolerance, inputs=None, exact=False) -> Check:
    value = float(value)
    return Check(name, inputs or {}, value, tolerance, "<=", exact, bool(value <= tolerance))


def check_ge(name, value, tolerance, inputs=None, exact=False) -> Check:
    value = float(value)
    return Check(name, inputs or {}, value, tolerance, ">=", exact, bool(value >= tolerance))


def check_eq(name, value, expected, inputs=None, exact=True) -> Check:
    inputs = dict(inputs or {})
    inputs["expected"] = expected
    return Check(name, inputs, value, 0, "==", exact, bool(value == expected))


def info(name, value, inputs=None, exact=True) -> Check:
    """Recorded quantity without a pass/fail criterion."""
    return Check(name, inputs or {}, value, None, "info", exact, True)


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    started: _dt.datetime = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc))
    wall_time_s: float = 0.0

    def add(self, *checks: Check) -> None:
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "toolkit": {"name": "coneflows", "version": __version__},
            "command": self.command,
            "config": _clean(self.config),
            "checks": [c.to_dict() for c in self.checks],
            "results": _clean(self.results),
            "passed": self.passed,
            "run": {"timestamp": self.started.isoformat(), "wall_time_s": round(self.wall_time_s, 6)},
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def dumps(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def deterministic_view(report: dict) -> dict:
    """The report without its ``run`` block, which is excluded from the determinism contract."""
    return {k: v for k, v in report.items() if k != "run"}
