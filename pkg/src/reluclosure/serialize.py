"""JSON round-trip for network configs, effective tuples and generalized responses.

Floats are written with ``repr`` (shortest round-tripping decimal), so a
dump/load cycle is lossless.  On input, numbers may also be given as
hex-float strings such as ``"0x1.8p+1"``.
"""

from __future__ import annotations

import json

import numpy as np

from .geometry import HalfSpace
from .response import EffectiveTuple, GeneralizedResponse, NetworkConfig, Summand


class FormatError(ValueError):
    pass


def num(v) -> float:
    if isinstance(v, bool):
        raise FormatError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        s = v.strip()
        try:
            if "0x" in s.lower():
                return float.fromhex(s)
            return float(s)
        except ValueError as exc:
            raise FormatError(f"not a number: {v!r}") from exc
    raise FormatError(f"expected a number, got {v!r}")


def nums(v) -> np.ndarray:
    if isinstance(v, (list, tuple)):
        return np.array([nums(e) if isinstance(e, (list, tuple)) else num(e) for e in v], dtype=float)
    return np.array(num(v))


def _list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def to_dict(obj) -> dict:
    if isinstance(obj, NetworkConfig):
        return {"type": "NetworkConfig", "d_in": obj.d_in, "W1": _list(obj.W1), "b1": _list(obj.b1),
                "W2": _list(obj.W2), "b2": obj.b2}
    if isinstance(obj, EffectiveTuple):
        return {"type": "EffectiveTuple", "d_in": obj.d_in, "normals": _list(obj.normals),
                "offsets": _list(obj.offsets), "kinks": _list(obj.kinks), "bias": obj.bias}
    if isinstance(obj, GeneralizedResponse):
        return {
            "type": "GeneralizedResponse",
            "affine_linear": _list(obj.affine_linear),
            "affine_const": obj.affine_const,
            "summands": [
                {"halfspace": {"normal": _list(s.halfspace.normal), "offset": s.halfspace.offset},
                 "delta": _list(s.delta), "jump": s.jump, "multiplicity": s.multiplicity}
                for s in obj.summands
            ],
            "m0": obj.m0,
            "case_tag": obj.case_tag,
        }
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _keys(d: dict, required: set, optional: set = frozenset()) -> None:
    if not isinstance(d, dict):
        raise FormatError("expected an object")
    missing = required - d.keys()
    extra = d.keys() - required - optional
    if missing:
        raise FormatError(f"missing keys: {sorted(missing)}")
    if extra:
        raise FormatError(f"unknown keys: {sorted(extra)}")


def _halfspace(d: dict) -> HalfSpace:
    _keys(d, {"normal", "offset"})
    n = nums(d["normal"])
    return HalfSpace(n, num(d["offset"])) if abs(np.linalg.norm(n) - 1) <= 1e-12 else \
        HalfSpace.from_normal(n, num(d["offset"]) * np.linalg.norm(n))


def from_dict(d: dict, kind: str | None = None):
    kind = kind or d.get("type")
    body = {k: v for k, v in d.items() if k != "type"}
    if kind == "NetworkConfig":
        _keys(body, {"W1", "b1", "W2", "b2"}, {"d_in"})
        d_in = int(body["d_in"]) if "d_in" in body else None
        return NetworkConfig(nums(body["W1"]), nums(body["b1"]), nums(body["W2"]), num(body["b2"]), d_in)
    if kind == "EffectiveTuple":
        _keys(body, {"normals", "offsets", "kinks", "bias"}, {"d_in"})
        d_in = int(body["d_in"]) if "d_in" in body else None
        return EffectiveTuple(nums(body["normals"]), nums(body["offsets"]), nums(body["kinks"]),
                              num(body["bias"]), d_in)
    if kind == "GeneralizedResponse":
        _keys(body, {"affine_linear", "affine_const", "summands"}, {"m0", "case_tag"})
        summands = []
        for s in body["summands"]:
            _keys(s, {"halfspace", "delta", "jump"}, {"multiplicity"})
            summands.append(Summand(_halfspace(s["halfspace"]), np.atleast_1d(nums(s["delta"])),
                                    num(s["jump"]), int(s.get("multiplicity", 2))))
        return GeneralizedResponse(np.atleast_1d(nums(body["affine_linear"])), num(body["affine_const"]),
                                   tuple(summands), int(body.get("m0", 0)), str(body.get("case_tag", "c")))
    raise FormatError(f"unknown object type {kind!r}")


def dumps(obj, **kw) -> str:
    return json.dumps(to_dict(obj), **kw)


def loads(text: str, kind: str | None = None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(str(exc)) from exc
    return from_dict(data, kind)
