"""Network configurations, effective tuples and generalized responses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import (
    GeometryError,
    HalfSpace,
    CellSignature,
    inside_mask,
    normalize,
)

CONTAINMENT_TOL = 1e-10
RANK_TOL = 1e-10
BREAKLINE_TOL = 1e-6


class ResponseError(ValueError):
    pass


class DimensionMismatch(ResponseError):
    pass


class InvalidResponse(ResponseError):
    pass


class SharedBreakline(ResponseError):
    pass


class OnBreakline(ResponseError):
    pass


class SignatureMismatch(ResponseError):
    pass


def _points(x, d_in: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    if d_in == 1 and X.ndim == 1 and X.size != 1:
        # a flat array of scalars in 1-d
        X = X[:, None]
        single = False
    else:
        X = np.atleast_2d(X) if X.ndim <= 1 else X
    if X.shape[-1] != d_in:
        raise DimensionMismatch(f"expected points of dimension {d_in}, got {X.shape[-1]}")
    return X, single


def _ret(vals, single):
    return float(vals[0]) if single else vals


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# raw networks


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """Shallow ReLU network ``x -> b2 + sum_j W2_j relu(W1_j . x + b1_j)``."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    d_in: int | None = None

    def __post_init__(self):
        W1 = np.asarray(self.W1, dtype=float)
        d_in = self.d_in
        if W1.ndim == 1:
            W1 = W1.reshape(-1, 1) if d_in in (None, 1) else W1.reshape(-1, d_in)
        if W1.ndim != 2:
            raise DimensionMismatch("W1 must be a matrix")
        if d_in is None:
            if W1.shape[0] == 0 and W1.shape[1] == 0:
                raise DimensionMismatch("d_in must be given for a zero-neuron network")
            d_in = W1.shape[1]
        if W1.shape[0] == 0:
            W1 = W1.reshape(0, d_in)
        b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        W2 = np.asarray(self.W2, dtype=float).reshape(-1)
        d = W1.shape[0]
        if W1.shape[1] != d_in or b1.size != d or W2.size != d:
            raise DimensionMismatch("inconsistent network dimensions")
        for name, v in (("W1", W1), ("b1", b1), ("W2", W2)):
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "b2", float(self.b2))
        object.__setattr__(self, "d_in", int(d_in))

    @property
    def width(self) -> int:
        return self.W1.shape[0]

    def theta(self) -> np.ndarray:
        """Flat parameters: W1 row-major, then b1, W2, b2."""
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])

    @classmethod
    def from_theta(cls, theta, d: int, d_in: int) -> "NetworkConfig":
        theta = np.asarray(theta, dtype=float)
        if theta.size != (d_in + 2) * d + 1:
            raise DimensionMismatch("theta has wrong length")
        k = d * d_in
        return cls(theta[:k].reshape(d, d_in), theta[k:k + d], theta[k + d:k + 2 * d], theta[-1], d_in)

    def __call__(self, x):
        return eval_network(self, x)


def eval_network(cfg: NetworkConfig, x):
    X, single = _points(x, cfg.d_in)
    return _ret(kernels.hinge_forward(X, cfg.W1, cfg.b1, cfg.W2, cfg.b2), single)


# ---------------------------------------------------------------------------
# effective tuples


@dataclass(frozen=True, eq=False)
class EffectiveTuple:
    """Unit normals, offsets, kinks and bias of a shallow ReLU response."""

    normals: np.ndarray
    offsets: np.ndarray
    kinks: np.ndarray
    bias: float
    d_in: int | None = None

    def __post_init__(self):
        N = np.asarray(self.normals, dtype=float)
        d_in = self.d_in
        if N.ndim == 1:
            N = N.reshape(-1, 1) if d_in in (None, 1) else N.reshape(-1, d_in)
        if d_in is None:
            if N.shape[0] == 0 and N.shape[1] == 0:
                raise DimensionMismatch("d_in must be given for a zero-neuron tuple")
            d_in = N.shape[1]
        if N.shape[0] == 0:
            N = N.reshape(0, d_in)
        o = np.asarray(self.offsets, dtype=float).reshape(-1)
        k = np.asarray(self.kinks, dtype=float).reshape(-1)
        if N.shape[1] != d_in or o.size != N.shape[0] or k.size != N.shape[0]:
            raise DimensionMismatch("inconsistent effective tuple dimensions")
        if N.shape[0] and np.max(np.abs(np.linalg.norm(N, axis=1) - 1.0)) > 1e-12:
            raise GeometryError("effective tuple normals must be unit vectors")
        for name, v in (("normals", N), ("offsets", o), ("kinks", k)):
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "d_in", int(d_in))

    @property
    def width(self) -> int:
        return self.normals.shape[0]

    def halfspaces(self) -> list[HalfSpace]:
        return [HalfSpace(n, o) for n, o in zip(self.normals, self.offsets)]

    def __call__(self, x):
        return eval_tuple(self, x)


def to_effective(cfg: NetworkConfig) -> EffectiveTuple:
    """Effective tuple of ``cfg``; degenerate neurons become kink-0 neurons with normal e1."""
    d, d_in = cfg.width, cfg.d_in
    normals = np.zeros((d, d_in))
    offsets = np.zeros(d)
    kinks = np.zeros(d)
    bias = cfg.b2
    for j in range(d):
        w = cfg.W1[j]
        big = np.max(np.abs(w))
        # rescale first so tiny rows do not underflow in the norm
        nrm = big * np.linalg.norm(w / big) if big > 0 else 0.0
        with np.errstate(over="ignore", divide="ignore"):
            off = -cfg.b1[j] / nrm if nrm > 0 else np.inf
        if not np.isfinite(off):
            # w = 0, or so small next to b1 that the breakline is out of float range
            normals[j, 0] = 1.0
            bias += cfg.W2[j] * max(cfg.b1[j], 0.0)
        else:
            normals[j] = (w / big) / np.linalg.norm(w / big)
            offsets[j] = off
            kinks[j] = nrm * cfg.W2[j]
    return EffectiveTuple(normals, offsets, kinks, bias, d_in)


def from_effective(t: EffectiveTuple) -> NetworkConfig:
    return NetworkConfig(t.normals.copy(), -t.offsets, t.kinks.copy(), t.bias, t.d_in)


def eval_tuple(t: EffectiveTuple, x):
    X, single = _points(x, t.d_in)
    return _ret(kernels.hinge_forward(X, t.normals, -t.offsets, t.kinks, t.bias), single)


def response_gradient(t: EffectiveTuple, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != t.d_in:
        raise DimensionMismatch("point dimension does not match tuple")
    if t.width == 0:
        return np.zeros(t.d_in)
    s = t.normals @ x - t.offsets
    if np.any(np.abs(s) <= BREAKLINE_TOL):
        raise OnBreakline(f"point {x.tolist()} lies within {BREAKLINE_TOL} of a breakline")
    active = s > 0
    return (t.kinks[active, None] * t.normals[active]).sum(axis=0)


# ---------------------------------------------------------------------------
# generalized responses


@dataclass(frozen=True, eq=False)
class Summand:
    """Jump term ``1_A(x) (delta . x + jump)``."""

    halfspace: HalfSpace
    delta: np.ndarray
    jump: float
    multiplicity: int = 2

    def __post_init__(self):
        object.__setattr__(self, "delta", _frozen(self.delta, 1))
        object.__setattr__(self, "jump", float(self.jump))
        object.__setattr__(self, "multiplicity", int(self.multiplicity))

    def containment_residual(self) -> float:
        """How far ``∂A ⊂ {delta . x + jump = 0}`` is from holding."""
        n, o = self.halfspace.normal, self.halfspace.offset
        c = float(self.delta @ n)
        return float(np.linalg.norm(self.delta - c * n) + abs(c * o + self.jump))

    def is_continuous(self, tol: float = CONTAINMENT_TOL) -> bool:
        return self.containment_residual() <= tol

    def values(self, X) -> np.ndarray:
        return inside_mask(self.halfspace, X) * (X @ self.delta + self.jump)


@dataclass(frozen=True, eq=False)
class GeneralizedResponse:
    """Affine part plus half-space jump summands with multiplicities."""

    affine_linear: np.ndarray
    affine_const: float
    summands: tuple[Summand, ...] = ()
    m0: int = 0
    case_tag: str = "c"

    def __post_init__(self):
        object.__setattr__(self, "affine_linear", _frozen(self.affine_linear, 1))
        object.__setattr__(self, "affine_const", float(self.affine_const))
        object.__setattr__(self, "summands", tuple(self.summands))
        object.__setattr__(self, "m0", int(self.m0))

    @property
    def d_in(self) -> int:
        return self.affine_linear.size

    def halfspaces(self) -> list[HalfSpace]:
        return [s.halfspace for s in self.summands]

    def dimension(self) -> int:
        return self.m0 + sum(s.multiplicity for s in self.summands)

    def __call__(self, x):
        return eval_generalized(self, x)


@dataclass
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def _dependent(normals: Sequence[np.ndarray]) -> bool:
    if len(normals) == 0:
        return False
    M = np.array(normals, dtype=float)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL))
    return rank < len(normals)


def validate(r: GeneralizedResponse) -> list[Violation]:
    """All violated representation conditions; an empty list means valid."""
    out: list[Violation] = []
    d_in = r.d_in
    if r.m0 not in (0, 1):
        out.append(Violation("m0", f"m0 must be 0 or 1, got {r.m0}"))
    if r.case_tag not in ("a", "b", "c"):
        out.append(Violation("case_tag", f"unknown case tag {r.case_tag!r}"))
    for k, s in enumerate(r.summands):
        if s.halfspace.dim != d_in or s.delta.size != d_in:
            out.append(Violation("dimension", f"summand {k} has inconsistent dimension"))
            return out
        if s.multiplicity not in (1, 2):
            out.append(Violation("multiplicity", f"summand {k} has multiplicity {s.multiplicity}"))
        elif s.multiplicity == 1 and not s.is_continuous():
            out.append(Violation(
                "containment",
                f"summand {k} has multiplicity 1 but its boundary is not contained in the zero set "
                f"of its affine term (residual {s.containment_residual():.3g})",
            ))
    for i, j in itertools.combinations(range(len(r.summands)), 2):
        if r.summands[i].halfspace.same_boundary(r.summands[j].halfspace):
            out.append(Violation(
                "distinct_boundaries",
                f"summands {i} and {j} violate pairwise distinct boundaries",
            ))
    two = [s.halfspace.normal for s in r.summands if s.multiplicity == 2]
    ok_a = r.m0 == 1
    ok_b = _dependent(two)
    ok_c = bool(np.all(np.abs(r.affine_linear) <= CONTAINMENT_TOL))
    tag_ok = {"a": ok_a, "b": ok_b, "c": ok_c}.get(r.case_tag, False)
    if not (ok_a or ok_b or ok_c):
        out.append(Violation("case", "none of the cases (a), (b), (c) holds"))
    elif r.case_tag in ("a", "b", "c") and not tag_ok:
        out.append(Violation("case_tag", f"case ({r.case_tag}) is claimed but does not hold"))
    return out


def _require_valid(r: GeneralizedResponse, ignore=()) -> None:
    bad = [v for v in validate(r) if v.code not in ignore]
    if bad:
        raise InvalidResponse("; ".join(map(str, bad)))


def eval_generalized(r: GeneralizedResponse, x):
    X, single = _points(x, r.d_in)
    vals = X @ r.affine_linear + r.affine_const
    for s in r.summands:
        vals = vals + s.values(X)
    return _ret(vals, single)


def tuple_to_generalized(t: EffectiveTuple) -> GeneralizedResponse:
    hs = t.halfspaces()
    for i, j in itertools.combinations(range(len(hs)), 2):
        if hs[i].same_boundary(hs[j]):
            raise SharedBreakline(f"neurons {i} and {j} share a breakline; merge them first")
    summands = tuple(
        Summand(h, k * h.normal, -k * h.offset, 1) for h, k in zip(hs, t.kinks)
    )
    return GeneralizedResponse(np.zeros(t.d_in), t.bias, summands, 0, "c")


def switch_sides(r: GeneralizedResponse, j: int) -> GeneralizedResponse:
    """Rewrite summand ``j`` over the opposite half-space (agrees off its boundary)."""
    if not 0 <= j < len(r.summands):
        raise IndexError(f"summand index {j} out of range")
    s = r.summands[j]
    new = Summand(s.halfspace.opposite(), -s.delta, -s.jump, s.multiplicity)
    summands = list(r.summands)
    summands[j] = new
    return replace(r, affine_linear=r.affine_linear + s.delta, affine_const=r.affine_const + s.jump,
                   summands=tuple(summands))


@dataclass(frozen=True)
class ResponseClass:
    reduced_dimension: int
    representable: bool
    case_tag: str

    def strict_at(self, d: int) -> bool:
        return self.reduced_dimension <= d - 1 or not self.representable


def _small(v, tol=1e-12) -> bool:
    return bool(np.all(np.abs(v) <= tol))


def canonical_reduce(r: GeneralizedResponse) -> tuple[GeneralizedResponse, ResponseClass]:
    """Merge, prune and re-tag ``r``; the reported dimension is an upper bound for the minimum."""
    _require_valid(r, ignore=("distinct_boundaries", "case", "case_tag"))
    lin = r.affine_linear.copy()
    const = r.affine_const
    merged: list[tuple[HalfSpace, np.ndarray, float]] = []
    for s in r.summands:
        for k, (h, dl, jp) in enumerate(merged):
            if h.same_boundary(s.halfspace):
                if np.dot(h.normal, s.halfspace.normal) > 0:
                    merged[k] = (h, dl + s.delta, jp + s.jump)
                else:
                    # 1_{A'} u = u - 1_A u off the common boundary
                    lin = lin + s.delta
                    const += s.jump
                    merged[k] = (h, dl - s.delta, jp - s.jump)
                break
        else:
            merged.append((s.halfspace, s.delta.copy(), s.jump))
    summands = []
    for h, dl, jp in merged:
        if _small(dl) and abs(jp) <= 1e-12:
            continue
        s = Summand(h, dl, jp, 1)
        if not s.is_continuous():
            s = replace(s, multiplicity=2)
        summands.append(s)
    base = GeneralizedResponse(lin, const, tuple(summands), 0, "c")
    two = [s.halfspace.normal for s in summands if s.multiplicity == 2]
    if _small(lin, CONTAINMENT_TOL):
        out = base
    elif _dependent(two):
        out = replace(base, case_tag="b")
    else:
        out = None
        # switching the sides of a subset can cancel the linear part
        idx = range(len(summands))
        for size in range(1, len(summands) + 1):
            for S in itertools.combinations(idx, size):
                if _small(lin + sum(summands[k].delta for k in S), CONTAINMENT_TOL):
                    cand = base
                    for k in S:
                        cand = switch_sides(cand, k)
                    out = replace(cand, affine_linear=np.zeros(r.d_in))
                    break
            if out is not None:
                break
        if out is None:
            out = replace(base, m0=1, case_tag="a")
    cls = ResponseClass(out.dimension(), all(s.multiplicity == 1 for s in out.summands), out.case_tag)
    return out, cls


def cell_affine(r: GeneralizedResponse, sig: CellSignature) -> tuple[np.ndarray, float]:
    """Gradient and intercept of ``r`` on the open cell ``sig``."""
    if len(sig) != len(r.summands):
        raise SignatureMismatch(f"signature of length {len(sig)} for {len(r.summands)} summands")
    grad = r.affine_linear.copy()
    icpt = r.affine_const
    for s, m in zip(r.summands, sig.membership):
        if m:
            grad = grad + s.delta
            icpt += s.jump
    return grad, icpt


def step_response(h: HalfSpace, jump: float = 1.0) -> GeneralizedResponse:
    """``jump * 1_h``: the prototypical discontinuous generalized response."""
    return GeneralizedResponse(np.zeros(h.dim), 0.0, (Summand(h, np.zeros(h.dim), jump, 2),), 0, "c")


def breaklines(obj) -> list[HalfSpace]:
    """Hyperplanes across which ``obj`` may fail to be affine."""
    if isinstance(obj, NetworkConfig):
        obj = to_effective(obj)
    if isinstance(obj, EffectiveTuple):
        return [h for h, k in zip(obj.halfspaces(), obj.kinks) if k != 0.0]
    if isinstance(obj, GeneralizedResponse):
        return obj.halfspaces()
    return list(getattr(obj, "cuts", ()))


def evaluator(obj):
    """Vectorised ``X (N, d_in) -> (N,)`` evaluation for any response-like object."""
    if isinstance(obj, NetworkConfig):
        return lambda X: kernels.hinge_forward(X, obj.W1, obj.b1, obj.W2, obj.b2)
    if isinstance(obj, EffectiveTuple):
        return lambda X: kernels.hinge_forward(X, obj.normals, -obj.offsets, obj.kinks, obj.bias)
    if isinstance(obj, GeneralizedResponse):
        return lambda X: eval_generalized(obj, np.atleast_2d(X))
    return obj


__all__ = [
    "NetworkConfig", "EffectiveTuple", "Summand", "GeneralizedResponse", "ResponseClass", "Violation",
    "eval_network", "to_effective", "from_effective", "eval_tuple", "response_gradient",
    "eval_generalized", "tuple_to_generalized", "switch_sides", "validate", "canonical_reduce",
    "cell_affine", "step_response", "breaklines", "evaluator", "normalize",
    "ResponseError", "DimensionMismatch", "InvalidResponse", "SharedBreakline", "OnBreakline",
    "SignatureMismatch",
]
