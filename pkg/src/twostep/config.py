"""Run configuration: one JSON document, schema-validated, layered over published defaults."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema

from .bench import ExperimentSpec
from .errors import CodecError, ConfigError
from .estimators import ESTIMATORS
from .normalize import NORMALIZERS

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_STEP = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 3.141592653589793}
_SIGMA = {"type": "number", "minimum": 0}
_NORM_ID = {"enum": sorted(NORMALIZERS)}
_EST_ID = {"enum": sorted(ESTIMATORS)}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


_BENCH = _obj({
    "pattern_count": {"type": "integer", "minimum": 1},
    "noise_levels": {"type": "array", "items": _SIGMA, "minItems": 1},
    "steps": {"type": "array", "items": _STEP, "minItems": 1},
    "normalizers": {"type": "array", "items": _NORM_ID, "minItems": 1},
    "estimators": {"type": "array", "items": _EST_ID, "minItems": 1},
    "pairs": {"oneOf": [{"type": "null"}, {"type": "array", "items": {
        "type": "array", "prefixItems": [_EST_ID, _NORM_ID], "minItems": 2, "maxItems": 2}}]},
    "record_time": {"type": "boolean"},
    "rp_samples": {"type": "integer", "minimum": 1},
    "qpp_window": {"type": "integer", "minimum": 8},
})

SCHEMA: dict = _obj({
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "field_size": {"type": "integer", "minimum": 16},
    "synth": _obj({
        "pattern": {"type": "integer", "minimum": 0},
        "delta": _STEP,
        "noise_sigma": _SIGMA,
        "model": {"type": ["object", "null"]},
    }),
    "normalizer": _obj({
        "name": _NORM_ID,
        "gfb": _obj({
            "orientations": {"type": "integer", "minimum": 4},
            "periods": {"type": "array", "items": {"type": "number", "minimum": 4}, "minItems": 1},
            "envelope_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "dc_removal_sigma": _POS,
            "margin": {"type": "integer", "minimum": 0},
        }),
        "baseline": _obj({
            "bg_sigma": {"type": "number", "minimum": 1},
            "env_sigma": {"type": "number", "minimum": 1},
            "margin": {"type": "integer", "minimum": 0},
        }),
    }),
    "bench": _BENCH,
    "sweeps": {"type": "object", "additionalProperties": _obj({
        "noise_levels": {"type": "array", "items": _SIGMA, "minItems": 1},
        "steps": {"type": "array", "items": _STEP, "minItems": 1},
    })},
})


def defaults() -> dict:
    """The published defaults document (a fresh copy)."""
    text = resources.files("twostep").joinpath("data/defaults.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(doc: Mapping[str, Any]) -> None:
    try:
        jsonschema.validate(doc, SCHEMA, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def merge(base: dict, override: Mapping[str, Any]) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace those in ``base``."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load(path: Optional[str | Path] = None) -> dict:
    """Validate a user document (if any) and layer it over the defaults."""
    user: dict = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CodecError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        validate(user)
    doc = merge(defaults(), user)
    validate(doc)
    return doc


def experiment_spec(doc: Mapping[str, Any], sweep: Optional[str] = None) -> ExperimentSpec:
    """Build the bench spec; ``sweep`` ("a" or "b") overrides noise levels and steps."""
    bench = dict(doc["bench"])
    if sweep is not None:
        try:
            bench.update(doc["sweeps"][sweep])
        except KeyError:
            raise ConfigError(f"unknown sweep {sweep!r}; defined: {sorted(doc['sweeps'])}") from None
    params = {}
    norm = doc["normalizer"]
    for name in ("gfb", "baseline"):
        if name in norm:
            params[name] = dict(norm[name])
    return ExperimentSpec(field_size=doc["field_size"], master_seed=doc["seed"],
                          normalizer_params=params, **bench)
