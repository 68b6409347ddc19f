"""Scenario configuration: schema, presets and loading.

A scenario is a YAML (or JSON) mapping with ``schema_version: 1`` and a
``mode``. Unknown keys are rejected. Missing optional keys are filled from
:data:`DEFAULTS`, so the resolved document is a complete, re-runnable
snapshot.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import jsonschema
import yaml

from dasa.exceptions import ConfigurationError

SCHEMA_VERSION = 1

_number = {"type": "number"}
_interval = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_root_policy = {"enum": ["largest", "smallest", "decay", "amplify"]}

_segment = {
    "type": "object",
    "additionalProperties": False,
    "required": ["omega1", "omega2", "gamma2", "gamma1", "t_end"],
    "properties": {
        "omega1": _number,
        "omega2": _number,
        "gamma2": _number,
        "gamma1": {"oneOf": [_number, _root_policy]},
        "t_end": _number,
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "mode"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mode": {"enum": ["dasa2", "dasa3", "lz", "roots", "optimize"]},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "propagation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["exact", "rk4"]},
                "sample_stride": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "csv": {"type": "boolean"},
                "svg": {"type": "boolean"},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "required": ["segments"],
            "properties": {
                "t_start": _number,
                "middle_onsite": _number,
                "initial_state": {"type": "integer", "minimum": 0},
                "target_state": {"type": "integer", "minimum": 0},
                "tail_duration": {"type": "number", "minimum": 0},
                "find_switch_time": {"type": "boolean"},
                "switch_horizon": {"type": "number", "exclusiveMinimum": 0},
                "segments": {"type": "array", "items": _segment, "minItems": 1},
            },
        },
        "lz": {
            "type": "object",
            "additionalProperties": False,
            "required": ["epsilons"],
            "properties": {
                "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "t_start": {"type": ["number", "null"]},
                "t_end": {"type": ["number", "null"]},
            },
        },
        "roots": {
            "type": "object",
            "additionalProperties": False,
            "required": ["delta_omegas"],
            "properties": {
                "delta_omegas": {"type": "array", "items": _number, "minItems": 1},
                "gamma2_start": _number,
                "gamma2_stop": _number,
                "gamma2_num": {"type": "integer", "minimum": 1},
            },
        },
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "budget": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "objective": {"enum": ["max_abs_gamma", "sum_abs_gain_integrals", "active_duration"]},
                "fidelity_floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "start": {"enum": ["reference", None]},
                "bounds": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        k: _interval
                        for k in (
                            "gamma2_decay",
                            "delta_omega_decay",
                            "duration_decay",
                            "gamma2_amplify",
                            "delta_omega_amplify",
                            "duration_amplify",
                        )
                    },
                },
            },
        },
    },
}

DEFAULTS = {
    "propagation": {"dt": 1e-3, "method": "exact", "sample_stride": 1},
    "output": {"dir": ".", "csv": True, "svg": True},
    "protocol": {
        "t_start": -15.0,
        "middle_onsite": 15.0,
        "initial_state": None,
        "target_state": 0,
        "tail_duration": 0.0,
        "find_switch_time": False,
        "switch_horizon": 10.0,
    },
    "lz": {"t_start": None, "t_end": None},
    "roots": {"gamma2_start": -3.0, "gamma2_stop": -0.05, "gamma2_num": 300},
    "optimize": {
        "budget": 500,
        "seed": 0,
        "objective": "max_abs_gamma",
        "fidelity_floor": 0.99,
        "start": "reference",
        "bounds": {
            "gamma2_decay": [-2.0, -0.1],
            "delta_omega_decay": [2.0, 15.0],
            "duration_decay": [2.0, 4.0],
            "gamma2_amplify": [-1.0, -0.05],
            "delta_omega_amplify": [-1.0, -0.005],
            "duration_amplify": [0.0, 10.0],
        },
    },
}

_MODE_SECTION = {"dasa2": "protocol", "dasa3": "protocol", "lz": "lz", "roots": "roots", "optimize": "optimize"}

_REFERENCE_SEGMENTS = [
    {"omega1": 0.0, "omega2": -10.0, "gamma2": -0.95, "gamma1": "decay", "t_end": -12.0},
    {"omega1": -0.01, "omega2": 0.0, "gamma2": -0.25, "gamma1": "largest", "t_end": -11.358},
]

PRESETS = {
    "dasa2-ref": {
        "schema_version": 1,
        "mode": "dasa2",
        "name": "dasa2",
        "protocol": {"t_start": -15.0, "segments": _REFERENCE_SEGMENTS},
    },
    "dasa3-ref": {
        "schema_version": 1,
        "mode": "dasa3",
        "name": "dasa3",
        "protocol": {
            "t_start": -15.0,
            "middle_onsite": 15.0,
            "segments": [dict(_REFERENCE_SEGMENTS[0]), dict(_REFERENCE_SEGMENTS[1], t_end=-10.7374)],
        },
    },
    "lz-ref": {
        "schema_version": 1,
        "mode": "lz",
        "name": "lz",
        "propagation": {"dt": 1e-3, "method": "rk4", "sample_stride": 100},
        "lz": {"epsilons": [0.5, 1.0, 2.0]},
    },
    "lz-6unit": {
        "schema_version": 1,
        "mode": "lz",
        "name": "lz6",
        "propagation": {"dt": 1e-3, "method": "rk4", "sample_stride": 10},
        "lz": {"epsilons": [math.sqrt(50.0 / 3.0)], "t_start": -3.0, "t_end": 3.0},
    },
    "roots-grid": {
        "schema_version": 1,
        "mode": "roots",
        "name": "roots",
        "roots": {"delta_omegas": [1.0, 2.0, 3.0, 4.0], "gamma2_start": -3.0, "gamma2_stop": -0.05, "gamma2_num": 300},
    },
    "optimize-ref": {
        "schema_version": 1,
        "mode": "optimize",
        "name": "optimize",
        "optimize": {"budget": 500, "seed": 0, "objective": "max_abs_gamma"},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc) -> None:
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a mapping")
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid configuration at {where}: {exc.message}") from None
    section = _MODE_SECTION[doc["mode"]]
    if section not in doc and section not in ("optimize",):
        raise ConfigurationError(f"mode {doc['mode']!r} requires a {section!r} section")
    extra = {s for s in _MODE_SECTION.values() if s in doc} - {section}
    if extra:
        raise ConfigurationError(f"sections {sorted(extra)} do not apply to mode {doc['mode']!r}")


def resolve(doc: dict, default_name: str = "scenario") -> dict:
    """Validate ``doc`` and fill in every default."""
    validate(doc)
    section = _MODE_SECTION[doc["mode"]]
    out = {"schema_version": SCHEMA_VERSION, "mode": doc["mode"], "name": doc.get("name", default_name)}
    out["propagation"] = _merge(DEFAULTS["propagation"], doc.get("propagation", {}))
    out["output"] = _merge(DEFAULTS["output"], doc.get("output", {}))
    out[section] = _merge(DEFAULTS[section], doc.get(section, {}))
    if section == "protocol" and out["protocol"]["initial_state"] is None:
        out["protocol"]["initial_state"] = 1 if doc["mode"] == "dasa2" else 2
    validate(out)
    return out


def preset(name: str) -> dict:
    try:
        return resolve(PRESETS[name], PRESETS[name]["name"])
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def load(path) -> dict:
    """Read and resolve a scenario file (YAML or JSON)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    return resolve(doc, path.stem)
