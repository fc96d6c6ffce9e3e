"""JSON job configuration: schema, validation and model construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .jumps import JumpSizeLaw, gaussian_jumps, lognormal_jumps, parse_jump_mode
from .pricing import MertonModel, PutSpec, merton_scheme
from .schemes import KINDS, Affine, SchemeSpec


class ConfigError(ValueError):
    """Invalid job configuration."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_AFFINE = {
    "type": "object",
    "properties": {"c0": _NUM, "c1": _NUM},
    "additionalProperties": False,
}
_LEVELS = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "preset": {"enum": ["merton"]},
                "scheme": {"enum": list(KINDS)},
                "x0": _NUM,
                "T": _POS,
                "n": {"type": "integer", "minimum": 1},
                "drift": _AFFINE,
                "diffusion": _AFFINE,
                "jump_coef": _AFFINE,
                "intensity": _NONNEG,
                "jump_law": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["gaussian", "lognormal_shift"]},
                        "mu": _NUM,
                        "theta": _NONNEG,
                    },
                    "additionalProperties": False,
                },
                "jump_mode": {"type": "string", "pattern": "^(short|truncated(:[0-9]+)?)$"},
                "nu_level": {"type": "integer", "minimum": 1},
                "sigma": _NONNEG,
                "rate": _NUM,
                "jump_vol": _NONNEG,
            },
            "additionalProperties": False,
        },
        "levels": _LEVELS,
        "quantizer": {
            "type": "object",
            "properties": {"tol": _POS, "max_iter": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "put": {
            "type": "object",
            "properties": {"strike": _POS, "rate": _NUM, "outer_discount": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "table1": {
            "type": "object",
            "properties": {
                "strikes": {"type": "array", "items": _POS},
                "intensities": {"type": "array", "items": _NONNEG},
                "jump_vols": {"type": "array", "items": _POS},
            },
            "additionalProperties": False,
        },
        "density": {
            "type": "object",
            "properties": {"steps": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            "additionalProperties": False,
        },
        "bounds": {
            "type": "object",
            "properties": {
                "p": {"type": "number", "exclusiveMinimum": 2, "maximum": 3},
                "L": _NONNEG,
                "upsilon": _NONNEG,
                "zeta_moment": _NONNEG,
                "lipschitz": {"type": "object", "additionalProperties": _NONNEG},
                "x0_norm_p": _NONNEG,
                "pierce": _POS,
                "product_constant": _POS,
                "d": {"type": "integer", "minimum": 1},
                "C0": _NONNEG,
                "C1": _NONNEG,
                "C2": _NONNEG,
                "weak": {
                    "type": "object",
                    "properties": {"grad_lip": _NONNEG, "f_lip": _NONNEG, "C": _NONNEG,
                                   "C_prime": _NONNEG},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "mc": {
            "type": "object",
            "properties": {"paths": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class JobConfig:
    raw: dict
    spec: SchemeSpec
    levels: int | list[int]
    tol: float = 1e-10
    max_iter: int = 100
    put: PutSpec | None = None
    merton: MertonModel | None = None
    outer_discount: bool = False
    extra: dict = field(default_factory=dict)


def _finite(obj, path="config"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(f"{path}: non-finite number")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{path}.{k}")
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _finite(v, f"{path}[{i}]")


def load_raw(path) -> dict:
    with open(Path(path)) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON: {err}") from err


def _affine(d: dict | None) -> Affine:
    d = d or {}
    return Affine(float(d.get("c0", 0.0)), float(d.get("c1", 0.0)))


def build_job(raw: dict, overrides: dict | None = None) -> JobConfig:
    """Validate `raw` (after applying CLI overrides) and build the scheme."""
    raw = json.loads(json.dumps(raw))
    overrides = overrides or {}
    model = raw.setdefault("model", {})
    for key in ("scheme", "jump_mode", "nu_level"):
        if overrides.get(key) is not None:
            model[key] = overrides[key]
    if overrides.get("levels") is not None:
        raw["levels"] = overrides["levels"]
    if overrides.get("seed") is not None:
        raw.setdefault("mc", {})["seed"] = overrides["seed"]
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {err.message}") from err
    _finite(raw)

    q = raw.get("quantizer", {})
    levels = raw.get("levels", 100)
    merton = None
    put = None
    try:
        if model.get("preset") == "merton":
            for key in ("sigma", "rate", "intensity", "jump_vol", "x0", "T", "n"):
                if key not in model:
                    raise ConfigError(f"model.{key} is required for the merton preset")
            merton = MertonModel(model["sigma"], model["intensity"], model["jump_vol"])
            put_raw = raw.get("put", {})
            put = PutSpec(put_raw.get("strike", model["x0"]), put_raw.get("rate", model["rate"]),
                          model["T"], model["x0"])
            spec = merton_scheme(merton, put, model["n"], model.get("nu_level", 50),
                                 model.get("jump_mode", "short"))
            if model.get("scheme", "jump_euler") != "jump_euler":
                raise ConfigError("the merton preset uses the jump_euler scheme")
        else:
            for key in ("scheme", "x0", "T", "n"):
                if key not in model:
                    raise ConfigError(f"model.{key} is required")
            jl = model.get("jump_law")
            jump_law: JumpSizeLaw | None = None
            if jl is not None:
                if jl["kind"] == "gaussian":
                    jump_law = gaussian_jumps(jl.get("mu", 0.0), jl.get("theta", 0.0))
                else:
                    jump_law = lognormal_jumps(jl.get("theta", 0.0))
            parse_jump_mode(model.get("jump_mode", "short"))
            spec = SchemeSpec(
                kind=model["scheme"],
                drift=_affine(model.get("drift")),
                diffusion=_affine(model.get("diffusion")),
                x0=model["x0"],
                T=model["T"],
                n=model["n"],
                jump_coef=_affine(model.get("jump_coef")) if "jump_coef" in model else None,
                intensity=model.get("intensity", 0.0),
                jump_law=jump_law,
                jump_mode=model.get("jump_mode", "short"),
                nu_level=model.get("nu_level", 50),
            )
            if "put" in raw:
                if "strike" not in raw["put"]:
                    raise ConfigError("put.strike is required")
                put = PutSpec(raw["put"]["strike"], raw["put"].get("rate", 0.0), model["T"], model["x0"])
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err

    if isinstance(levels, list) and len(levels) not in (spec.n, spec.n + 1):
        raise ConfigError(f"levels list must have n or n + 1 entries, got {len(levels)}")
    return JobConfig(raw=raw, spec=spec, levels=levels, tol=q.get("tol", 1e-10),
                     max_iter=q.get("max_iter", 100), put=put, merton=merton,
                     outer_discount=raw.get("put", {}).get("outer_discount", False))


def parse_levels(text: str) -> int | list[int]:
    """'100' or '1,50,50,...' from the command line."""
    try:
        parts = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise ConfigError(f"bad --levels value {text!r}") from err
    if not parts:
        raise ConfigError("empty --levels")
    return parts[0] if len(parts) == 1 else parts
