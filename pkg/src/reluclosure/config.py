"""Experiment config files: JSON schema, loading and object construction.

Numbers may be written as decimals or as hex-float strings (``"0x1.8p-1"``).
Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from . import serialize
from .geometry import BoxDomain, HalfSpace
from .landscape import LossSpec, TrainConfig, abs_loss, lp_loss, make_target
from .quadrature import Measure, SurfaceRule, VolumeRule, make_density

NUM = {"anyOf": [{"type": "number"},
                 {"type": "string", "pattern": r"^\s*[-+]?(0[xX][0-9a-fA-F.]+([pP][-+]?\d+)?|inf|nan)\s*$"}]}
VEC = {"type": "array", "items": NUM}
INT = {"type": "integer"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


DENSITY = _obj({"kind": {"enum": ["uniform", "truncated-gaussian", "bump"]},
                "center": {"anyOf": [NUM, VEC]}, "sigma": NUM, "radius": NUM}, ["kind"])

MEASURE = _obj({"lower": VEC, "upper": VEC, "density": DENSITY}, ["lower", "upper"])

TARGET = _obj({"kind": {"enum": ["abs", "ramp", "quadratic", "piecewise-linear", "constant", "affine", "step"]},
               "a": NUM, "knots": {"type": "array", "items": VEC}, "value": NUM,
               "coef": {"anyOf": [NUM, VEC]}, "const": NUM,
               "normal": VEC, "offset": NUM, "jump": NUM}, ["kind"])

LOSS = _obj({"kind": {"enum": ["lp", "l1"]}, "p": NUM}, ["kind"])

QUAD = _obj({"kind": {"enum": ["tensor-gauss", "midpoint", "monte-carlo"]},
             "resolution": {"anyOf": [INT, {"type": "null"}]}, "seed": INT, "cell_order": INT})

TRAIN = _obj({"d": INT, "step_size": NUM, "steps": INT, "seed": INT, "scale": NUM,
              "init": {"enum": ["geometric", "zero"]},
              "gradient": {"enum": ["analytic", "finite-difference"]},
              "quadrature": QUAD, "snapshot_every": INT, "fd_step": NUM}, ["d"])

ORACLE = _obj({"d": INT, "budget": INT, "seed": INT, "restarts": INT, "quadrature": QUAD}, ["d"])

OBJECT = {"type": "object", "required": ["type"]}  # checked in detail by serialize.from_dict

PERTURB = _obj({"response": {"anyOf": [OBJECT, {"type": "string"}]},
                "kappa_grid": VEC, "surface_resolution": INT, "quadrature": QUAD,
                "check_loss": {"type": "boolean"}}, ["response"])

CLOSURE = _obj({"normal": VEC, "offset": NUM, "jump": NUM, "t_grid": VEC, "quadrature": QUAD},
               ["normal", "t_grid"])

EVAL = _obj({"object": {"anyOf": [OBJECT, {"type": "string"}]},
             "points": {"type": "array", "items": VEC}}, ["object", "points"])

OUTPUT = _obj({"dir": {"type": "string"}, "prefix": {"type": "string"}})

SCHEMA = _obj({"measure": MEASURE, "target": TARGET, "loss": LOSS, "train": TRAIN, "oracle": ORACLE,
               "response": {"anyOf": [OBJECT, {"type": "string"}]},
               "perturbation": PERTURB, "closure": CLOSURE, "eval": EVAL, "output": OUTPUT})

# sections each command cannot run without
REQUIRED = {
    "validate": [],
    "train": ["measure", "target", "loss", "train"],
    "oracle": ["measure", "target", "loss", "oracle"],
    "perturb": ["measure", "target", "loss", "perturbation"],
    "closure-demo": ["measure", "closure"],
    "eval": ["eval"],
}


class ConfigError(ValueError):
    """Unparseable or schema-invalid config (usage error)."""


def load(path, command: str | None = None) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from exc
    if command is not None:
        missing = [k for k in REQUIRED[command] if k not in cfg]
        if missing:
            raise ConfigError(f"{path}: '{command}' needs section(s): {', '.join(missing)}")
    cfg["_base"] = str(path.parent)
    return cfg


def _num(v):
    return serialize.num(v)


def _nums(v):
    return serialize.nums(v)


def _clean(d: dict) -> dict:
    """Decode hex-float strings inside a flat-ish spec dict."""
    out = {}
    for k, v in d.items():
        if isinstance(v, str) and k != "kind":
            out[k] = _num(v)
        elif isinstance(v, list):
            out[k] = [_clean_list(x) for x in v]
        else:
            out[k] = v
    return out


def _clean_list(v):
    if isinstance(v, list):
        return [_clean_list(x) for x in v]
    return _num(v)


def measure(cfg: dict) -> Measure:
    s = cfg["measure"]
    try:
        dom = BoxDomain(_nums(s["lower"]), _nums(s["upper"]))
        return Measure(dom, make_density(_clean(s.get("density", {"kind": "uniform"})), dom))
    except ValueError as exc:
        raise ConfigError(f"measure: {exc}") from exc


def loss(cfg: dict, d_in: int) -> LossSpec:
    try:
        f = make_target(_clean(cfg["target"]), d_in)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"target: {exc}") from exc
    s = cfg["loss"]
    if s["kind"] == "l1":
        return abs_loss(f)
    return lp_loss(f, _num(s.get("p", 2.0)))


def quadrature(s: dict | None) -> VolumeRule:
    return VolumeRule(**(s or {}))


def train_config(cfg: dict, seed: int | None = None) -> TrainConfig:
    s = dict(cfg["train"])
    if seed is not None:
        s["seed"] = seed
    s["quadrature"] = quadrature(s.get("quadrature"))
    for k in ("step_size", "scale", "fd_step"):
        if k in s:
            s[k] = _num(s[k])
    try:
        return TrainConfig(**s)
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc


def load_object(spec, cfg: dict, kind: str | None = None):
    """Inline serialized object, or a path (relative to the config) to one."""
    if isinstance(spec, str):
        p = Path(spec)
        if not p.is_absolute():
            p = Path(cfg.get("_base", ".")) / p
        try:
            spec = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load object from {p}: {exc}") from exc
    try:
        return serialize.from_dict(spec, kind)
    except serialize.FormatError as exc:
        raise ConfigError(str(exc)) from exc


def surface_rule(s: dict) -> SurfaceRule:
    return SurfaceRule(int(s.get("surface_resolution", 32)))


def closure_plane(s: dict) -> HalfSpace:
    return HalfSpace.from_normal(_nums(s["normal"]), _num(s.get("offset", 0.0)))


def as_points(rows, d_in: int) -> np.ndarray:
    X = np.array([[_num(v) for v in r] for r in rows], dtype=float).reshape(-1, d_in)
    return X
