"""Run configuration: JSON schema, validation with path-precise errors, object construction, seeded streams."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .cone_lattice import ConeSpec, HalfSpace, LatticeModule, Window, module_check
from .isometric_rep import DirectSumShift, IsometricRep, LatticeShift
from .linalg_core import DEFAULT_TOL, Tolerances

SCHEMA_VERSION = 1

_int_vec = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_window = {
    "type": "object",
    "properties": {"lower": _int_vec, "upper": _int_vec},
    "required": ["lower", "upper"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "coneflows run configuration",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "cone": {
            "type": "object",
            "properties": {"generators": {"type": "array", "items": _int_vec, "minItems": 1}},
            "required": ["generators"],
            "additionalProperties": False,
        },
        "module": {
            "type": "object",
            "properties": {
                "offset": _int_vec,
                "halfspaces": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"normal": _int_vec, "offset": {"type": "integer"}},
                        "required": ["normal", "offset"],
                        "additionalProperties": False,
                    },
                },
                "points": {"type": "array", "items": _int_vec},
                "window": _window,
            },
            "additionalProperties": False,
        },
        "rep": {
            "type": "object",
            "properties": {
                "flavor": {"enum": ["lattice_shift", "direct_sum"]},
                "multiplicity": {"type": "integer", "minimum": 0},
                "multiplicities": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
            "required": ["flavor"],
            "additionalProperties": False,
        },
        "window": _window,
        "cutoff": {"type": "integer", "minimum": 1},
        "budget": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "properties": {
                "rank": {"type": "number", "exclusiveMinimum": 0},
                "ortho": {"type": "number", "exclusiveMinimum": 0},
                "containment": {"type": "number", "exclusiveMinimum": 0},
                "zero": {"type": "number", "exclusiveMinimum": 0},
                "positive": {"type": "number", "exclusiveMinimum": 0},
                "sector_divisor": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "points": {
            "type": "object",
            "properties": {"x": _int_vec, "y": _int_vec, "z": {"type": "array", "items": _int_vec}},
            "additionalProperties": False,
        },
        "decomposables": {
            "type": "object",
            "properties": {
                "flavor": {"enum": ["CCR", "CAR"]},
                "x": _int_vec,
                "subdivisions": {"type": ["array", "null"], "items": _int_vec},
                "refinement": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
            "additionalProperties": False,
        },
        "fock": {
            "type": "object",
            "properties": {
                "modes": {"type": "integer", "minimum": 1, "maximum": 3},
                "cutoff": {"type": "integer", "minimum": 1},
                "norm": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "matrix_trials": {"type": "integer", "minimum": 1},
                "kernel_dim": {"type": "integer", "minimum": 1, "maximum": 8},
                "kernel_pairs": {"type": "integer", "minimum": 1},
                "kernel_points": {"type": "integer", "minimum": 1},
                "fermion_modes": {"type": "integer", "minimum": 1, "maximum": 6},
            },
            "additionalProperties": False,
        },
        "witness": {
            "type": "object",
            "properties": {
                "car_cutoff": {"type": "integer", "minimum": 1},
                "ccr_cutoff": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema_version", "seed"],
    "additionalProperties": False,
}

_quantity = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "inputs": {"type": "object"},
        "value": {"type": ["number", "integer", "boolean", "string", "null"]},
        "tolerance": {"type": ["number", "integer", "null"]},
        "relation": {"enum": ["<=", ">=", "==", "info"]},
        "exact": {"type": "boolean"},
        "passed": {"type": "boolean"},
    },
    "required": ["name", "inputs", "value", "tolerance", "relation", "exact", "passed"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "coneflows run report",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "toolkit": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "version": {"type": "string"}},
            "required": ["name", "version"],
        },
        "command": {"type": "string"},
        "config": {"type": "object"},
        "checks": {"type": "array", "items": _quantity},
        "results": {"type": "object"},
        "passed": {"type": "boolean"},
        "run": {
            "type": "object",
            "description": "excluded from the determinism contract",
            "properties": {"timestamp": {"type": "string"}, "wall_time_s": {"type": "number"}},
        },
    },
    "required": ["schema_version", "toolkit", "command", "config", "checks", "results", "passed", "run"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate(data: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(_json_path(e.absolute_path), e.message)


def load_config(path: str | Path, seed: int | None = None) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError("$", f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from exc
    if seed is not None:
        if not isinstance(data, dict):
            raise ConfigError("$", "top level must be an object")
        data["seed"] = seed
    validate(data)
    return data


@dataclass(frozen=True, eq=False)
class Setup:
    """Objects built from a validated configuration."""

    config: dict
    cone: ConeSpec
    rep: IsometricRep
    window: Window | None
    tol: Tolerances
    seed: int

    def rng(self, name: str) -> np.random.Generator:
        return named_rng(self.seed, name)


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, name)``."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.Philox(ss))


def _window(data, path: str, d: int) -> Window:
    try:
        w = Window.from_dict(data)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc
    if w.dim != d:
        raise ConfigError(path, f"window has dimension {w.dim}, cone has dimension {d}")
    return w


def build(config: dict) -> Setup:
    """Construct cone, representation and window, raising :class:`ConfigError` on semantic problems."""
    cone_data = config.get("cone", {"generators": [[1]]})
    try:
        cone = ConeSpec(tuple(tuple(g) for g in cone_data["generators"]))
    except ValueError as exc:
        raise ConfigError("$.cone.generators", str(exc)) from exc
    d = cone.dim
    rep_data = config.get("rep", {"flavor": "lattice_shift", "multiplicity": 1})
    # a direct-sum window is a 1-d depth range along every summand
    wdim = 1 if rep_data["flavor"] == "direct_sum" else d
    window = _window(config["window"], "$.window", wdim) if "window" in config else None

    if rep_data["flavor"] == "lattice_shift":
        mod = config.get("module", {})
        try:
            if "points" in mod:
                if "window" not in mod:
                    raise ConfigError("$.module.window", "an explicit point set needs a declared window")
                declared = _window(mod["window"], "$.module.window", d)
                module = LatticeModule.from_points(cone, [tuple(p) for p in mod["points"]], declared)
            elif "halfspaces" in mod:
                hs = tuple(HalfSpace(tuple(h["normal"]), h["offset"]) for h in mod["halfspaces"])
                module = LatticeModule(cone, halfspaces=hs)
            else:
                module = LatticeModule.of_cone(cone, tuple(mod["offset"]) if "offset" in mod else None)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("$.module", str(exc)) from exc
        if window is not None:
            chk = module_check(module, window)
            if not chk.ok:
                raise ConfigError("$.module", f"not a module of the cone: {chk.violation}")
        rep: IsometricRep = LatticeShift(module, rep_data.get("multiplicity", 1))
    else:
        ks = rep_data.get("multiplicities")
        if ks is None:
            raise ConfigError("$.rep.multiplicities", "direct_sum needs one multiplicity per generator")
        try:
            rep = DirectSumShift(ks, cone)
        except ValueError as exc:
            raise ConfigError("$.rep.multiplicities", str(exc)) from exc
    tol = DEFAULT_TOL.updated(**config.get("tolerances", {}))
    return Setup(config, cone, rep, window, tol, int(config["seed"]))


def _point(config: dict, key: str, default, cone: ConeSpec, section: str = "points"):
    p = tuple(config.get(section, {}).get(key, default))
    if cone.coefficients(p) is None:
        raise ConfigError(f"$.{section}.{key}", f"{list(p)} is not in the cone")
    return p


def config_point(setup: Setup, key: str, default, section: str = "points"):
    return _point(setup.config, key, default, setup.cone, section)
