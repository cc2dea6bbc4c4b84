"""Discontinuous limits of representable responses and the κ-perturbation
that beats a discontinuous response with a representable one.

The perturbation works on a generalized response whose multiplicity-2
normals admit a positive dependence ``sum_j alpha_j n_j = 0``.  Each jump
summand is rewritten as a plus/minus split and replaced by a pair of ReLU
hinges of slope ``kappa * alpha_j`` along its normal.  The resulting network
agrees with the response away from thin slabs around the breaklines; on the
slabs it interpolates linearly across the jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import BoxDomain, HalfSpace, NoIntersection, inside_mask
from .landscape import LossSpec, loss_audit, param_norm
from .polygon import gauss_legendre
from .quadrature import Measure, SurfaceRule, VolumeRule, error_functional, integrate_surface
from .response import (
    EffectiveTuple,
    GeneralizedResponse,
    InvalidResponse,
    NetworkConfig,
    _dependent,
    eval_generalized,
    from_effective,
    switch_sides,
    to_effective,
    validate,
)

ON_PLANE_TOL = 1e-10
IMPROVEMENT_TOL = 1e-9


class ClosureError(ValueError):
    pass


class ReconstructionFailed(ClosureError):
    pass


class KappaTooSmall(ClosureError):
    pass


class OffBreakline(ClosureError):
    pass


class NoDependence(ClosureError):
    pass


class LossAuditFailed(ClosureError):
    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


@dataclass(frozen=True, eq=False)
class DependenceVector:
    """Positive coefficients on a minimal dependent set of multiplicity-2 normals.

    ``response`` is the input with sides switched so that all coefficients
    are positive; the perturbation is built from it.
    """

    support: tuple[int, ...]
    alphas: np.ndarray
    response: GeneralizedResponse

    def alpha(self, j: int) -> float:
        return float(self.alphas[self.support.index(j)])


def find_dependence(r: GeneralizedResponse) -> DependenceVector | None:
    bad = validate(r)
    if bad:
        raise InvalidResponse("; ".join(map(str, bad)))
    idx = [k for k, s in enumerate(r.summands) if s.multiplicity == 2]
    normals = {k: r.summands[k].halfspace.normal for k in idx}
    if not _dependent([normals[k] for k in idx]):
        return None
    support = list(idx)
    shrunk = True
    while shrunk:
        shrunk = False
        for k in reversed(support):
            rest = [i for i in support if i != k]
            if _dependent([normals[i] for i in rest]):
                support = rest
                shrunk = True
                break
    M = np.array([normals[k] for k in support]).T
    _, _, vt = np.linalg.svd(M)
    alpha = vt[-1]
    if np.sum(alpha < 0) > np.sum(alpha > 0) or (np.sum(alpha < 0) == np.sum(alpha > 0) and alpha[0] < 0):
        alpha = -alpha
    alpha = alpha / np.max(np.abs(alpha))
    out = r
    for k, a in zip(support, alpha):
        if a < 0:
            out = switch_sides(out, k)
    return DependenceVector(tuple(support), np.abs(alpha), out)


@dataclass(frozen=True, eq=False)
class SplitParts:
    """``R(x) = bias + sum_j [1_{A_j}(δ_j⁺x + b_j⁺) + 1_{A_jᶜ}(δ_j⁻x + b_j⁻)]`` off boundaries."""

    halfspaces: tuple[HalfSpace, ...]
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray
    bias: float

    def reconstruct(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.full(len(X), self.bias)
        for j, h in enumerate(self.halfspaces):
            inside = inside_mask(h, X)
            out += np.where(inside, X @ self.delta_plus[j] + self.b_plus[j],
                            X @ self.delta_minus[j] + self.b_minus[j])
        return out

    def others(self, j: int, X) -> np.ndarray:
        """The response without summand ``j``, evaluated on ``X``."""
        X = np.atleast_2d(X)
        out = np.full(len(X), self.bias)
        for i, h in enumerate(self.halfspaces):
            if i == j:
                continue
            inside = inside_mask(h, X)
            out += np.where(inside, X @ self.delta_plus[i] + self.b_plus[i],
                            X @ self.delta_minus[i] + self.b_minus[i])
        return out

    def endpoints(self, j: int, X) -> tuple[np.ndarray, np.ndarray]:
        """Values of ``R`` on the outside and inside of breakline ``j`` at ``X``."""
        X = np.atleast_2d(X)
        rest = self.others(j, X)
        return (X @ self.delta_minus[j] + self.b_minus[j] + rest,
                X @ self.delta_plus[j] + self.b_plus[j] + rest)


def _probe_points(r: GeneralizedResponse, n: int = 100, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    scale = 2.0 * (1.0 + max([abs(s.halfspace.offset) for s in r.summands], default=0.0))
    X = rng.uniform(-scale, scale, size=(4 * n, r.d_in))
    ok = np.ones(len(X), dtype=bool)
    for s in r.summands:
        ok &= np.abs(s.halfspace.signed_distance(X)) > 1e-9
    return X[ok][:n]


def make_splits(r: GeneralizedResponse, dep: DependenceVector | None = None) -> SplitParts:
    """Canonical split: plus side carries each summand, the linear part rides on the first support summand."""
    if dep is None:
        dep = find_dependence(r)
        if dep is None:
            raise NoDependence("multiplicity-2 normals are linearly independent")
        r = dep.response
    unsupported = [k for k, s in enumerate(r.summands) if s.multiplicity == 2 and k not in dep.support]
    if unsupported:
        raise ClosureError(f"multiplicity-2 summands {unsupported} lie outside the dependence support")
    K, d_in = len(r.summands), r.d_in
    dp = np.array([s.delta for s in r.summands]).reshape(K, d_in)
    dm = np.zeros((K, d_in))
    bp = np.array([s.jump for s in r.summands])
    bm = np.zeros(K)
    lin = r.affine_linear
    if np.any(lin != 0.0):
        j1 = dep.support[0]
        dp[j1] = dp[j1] + lin
        dm[j1] = lin.copy()
    sp = SplitParts(tuple(s.halfspace for s in r.summands), dp, dm, bp, bm, r.affine_const)
    X = _probe_points(r)
    diff = np.abs(sp.reconstruct(X) - eval_generalized(r, X))
    if len(X) and np.max(diff) > 1e-10 * max(1.0, float(np.max(np.abs(eval_generalized(r, X))))):
        raise ReconstructionFailed(f"split reconstruction off by {np.max(diff):.3g}")
    return sp


def kappa_min(dep: DependenceVector, splits: SplitParts, domain: BoxDomain) -> float:
    diam = domain.diameter
    vals = []
    for j in dep.support:
        for dl, b in ((splits.delta_plus[j], splits.b_plus[j]), (splits.delta_minus[j], splits.b_minus[j])):
            vals.append((np.linalg.norm(dl) + abs(b) / diam) / dep.alpha(j))
    return max(vals, default=0.0)


def kappa_perturb(r: GeneralizedResponse, dep: DependenceVector, splits: SplitParts, kappa: float,
                  sign: int = 1, domain: BoxDomain | None = None) -> EffectiveTuple:
    """Representable network ``R^{±κ}`` (two hinge neurons per support summand)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    domain = domain or BoxDomain.cube(r.d_in)
    kmin = kappa_min(dep, splits, domain)
    if not kappa > kmin:
        raise KappaTooSmall(f"kappa={kappa} must exceed {kmin:.6g}")
    W1, b1, W2 = [], [], []
    bias = splits.bias
    for j, h in enumerate(splits.halfspaces):
        n, o = h.normal, h.offset
        if j in dep.support:
            ka = kappa * dep.alpha(j)
            dp, dm, bp, bm = splits.delta_plus[j], splits.delta_minus[j], splits.b_plus[j], splits.b_minus[j]
            if sign == 1:
                W1 += [dp + ka * n, -dm - ka * n]
                b1 += [bp - ka * o, -bm + ka * o]
                W2 += [1.0, -1.0]
            else:
                W1 += [-dp + ka * n, dm - ka * n]
                b1 += [-bp - ka * o, bm + ka * o]
                W2 += [-1.0, 1.0]
            bias += sign * ka * o
        else:
            s = r.summands[j]
            if not s.is_continuous():
                raise ClosureError(f"summand {j} is discontinuous but outside the dependence support")
            W1.append(n.copy())
            b1.append(-o)
            W2.append(float(s.delta @ n))
    cfg = NetworkConfig(np.array(W1).reshape(-1, r.d_in), np.array(b1), np.array(W2), bias, r.d_in)
    return to_effective(cfg)


def q_values(j: int, xprime, dep: DependenceVector, splits: SplitParts) -> tuple[float, float]:
    """Limiting (κ-rescaled) lengths of the slab segment on each side of breakline ``j``."""
    x = np.atleast_1d(np.asarray(xprime, dtype=float))
    h = splits.halfspaces[j]
    if abs(float(h.signed_distance(x))) >= ON_PLANE_TOL:
        raise OffBreakline(f"point {x.tolist()} is not on breakline {j}")
    qp, qm = _q_arrays(j, x[None, :], dep, splits)
    return float(qp[0]), float(qm[0])


def _q_arrays(j, X, dep, splits):
    a = dep.alpha(j)
    tp = -(X @ splits.delta_plus[j] + splits.b_plus[j]) / a
    tm = -(X @ splits.delta_minus[j] + splits.b_minus[j]) / a
    lo, hi = np.minimum(tp, tm), np.maximum(tp, tm)
    qp = np.maximum(hi, 0.0) - np.maximum(lo, 0.0)
    qm = np.minimum(hi, 0.0) - np.minimum(lo, 0.0)
    return qp, qm


def _segment_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n <= 16:
        return gauss_legendre(max(n, 1))
    panels = n // 8
    x, w = gauss_legendre(8)
    starts = np.arange(panels) / panels
    return (starts[:, None] + x[None, :] / panels).ravel(), np.tile(w / panels, panels)


def _segment_terms(loss: LossSpec, X, ya, yb, quad_points: int):
    """Mean of ``L(x, ·)`` over ``[ya, yb]`` and the two endpoint losses, per row."""
    tau, w = _segment_rule(quad_points)
    Lm = loss.pointwise(X, ya)
    Lp = loss.pointwise(X, yb)
    Lbar = np.zeros(len(X))
    for tk, wk in zip(tau, w):
        Lbar += wk * loss.pointwise(X, ya + tk * (yb - ya))
    same = ya == yb
    Lbar[same] = Lm[same]
    return Lbar, Lp, Lm


def segment_average_loss(loss: LossSpec, xprime, j: int, splits: SplitParts,
                         quad_points: int = 16) -> tuple[float, float, float]:
    """``(L̄, L⁺, L⁻)`` at a breakline point."""
    X = np.atleast_2d(np.asarray(xprime, dtype=float))
    ym, yp = splits.endpoints(j, X)
    Lbar, Lp, Lm = _segment_terms(loss, X, ym, yp, quad_points)
    return float(Lbar[0]), float(Lp[0]), float(Lm[0])


def _decrement_cuts(j: int, splits: SplitParts, loss: LossSpec) -> list[HalfSpace]:
    cuts = [h for i, h in enumerate(splits.halfspaces) if i != j]
    for dl, b in ((splits.delta_plus[j], splits.b_plus[j]), (splits.delta_minus[j], splits.b_minus[j])):
        if np.linalg.norm(dl) > 0:
            cuts.append(HalfSpace.from_normal(dl, -b))
    return cuts + list(getattr(loss, "cuts", ()) or ())


def limit_decrement(r: GeneralizedResponse, dep: DependenceVector, splits: SplitParts, loss: LossSpec,
                    m: Measure, srule: SurfaceRule = SurfaceRule(), quad_points: int = 16) -> float:
    """Limit of ``κ (err(R^κ) + err(R^{-κ}) - 2 err(R))`` as a sum of breakline integrals."""
    total = 0.0
    for j in dep.support:
        def g(X, j=j):
            ym, yp = splits.endpoints(j, X)
            qp, qm = _q_arrays(j, X, dep, splits)
            Lbar, Lp, Lm = _segment_terms(loss, X, ym, yp, quad_points)
            return (qp + qm) * (2.0 * Lbar - (Lp + Lm))

        try:
            total += integrate_surface(g, splits.halfspaces[j], m, srule, _decrement_cuts(j, splits, loss))
        except NoIntersection:
            continue
    return total


@dataclass
class PerturbationReport:
    kappa_grid: list[float]
    err_R: float
    err_plus: list[float]
    err_minus: list[float]
    scaled_sum: list[float]
    decrement: float
    improving_kappa: float | None = None
    kappa_min: float = 0.0

    def rows(self):
        for k, ep, em, s in zip(self.kappa_grid, self.err_plus, self.err_minus, self.scaled_sum):
            yield k, self.err_R, ep, em, s

    def summary(self) -> dict:
        return {"decrement": self.decrement, "improving_kappa": self.improving_kappa, "err_R": self.err_R}


def verify_improvement(r: GeneralizedResponse, loss: LossSpec, m: Measure,
                       kappa_grid: Sequence[float] = (50, 100, 200, 400),
                       rule: VolumeRule = VolumeRule(), srule: SurfaceRule = SurfaceRule(),
                       check_loss: bool = True) -> PerturbationReport:
    """Finite-κ errors of ``R^{±κ}`` against ``R`` together with the limiting decrement."""
    if check_loss:
        audit = loss_audit(loss, m)
        if "strict_convexity" in audit.kinds() or "convexity" in audit.kinds():
            raise LossAuditFailed(audit)
    kappas = [float(k) for k in kappa_grid]
    dep = find_dependence(r)
    if dep is None:
        if any(s.multiplicity == 2 and not s.is_continuous() for s in r.summands):
            raise NoDependence("discontinuous summands with linearly independent normals")
        e = error_functional(r, loss, m, rule)
        n = len(kappas)
        return PerturbationReport(kappas, e, [e] * n, [e] * n, [0.0] * n, 0.0, None)
    rr = dep.response
    splits = make_splits(rr, dep)
    err_R = error_functional(rr, loss, m, rule)
    dec = limit_decrement(rr, dep, splits, loss, m, srule)
    ep, em, ss = [], [], []
    improving = None
    for k in kappas:
        e_plus = error_functional(kappa_perturb(rr, dep, splits, k, 1, m.domain), loss, m, rule)
        e_minus = error_functional(kappa_perturb(rr, dep, splits, k, -1, m.domain), loss, m, rule)
        ep.append(e_plus)
        em.append(e_minus)
        ss.append(k * (e_plus + e_minus - 2.0 * err_R))
        if improving is None and min(e_plus, e_minus) < err_R - IMPROVEMENT_TOL:
            improving = k
    return PerturbationReport(kappas, err_R, ep, em, ss, dec, improving, kappa_min(dep, splits, m.domain))


# ---------------------------------------------------------------------------
# closure phenomenon


def discontinuity_approximant(h: HalfSpace, jump: float, t: float) -> EffectiveTuple:
    """Two-neuron ramp of width ``1/t`` converging to ``jump * 1_h`` off the boundary."""
    if not t > 0:
        raise ValueError("t must be positive")
    n = h.normal
    return EffectiveTuple(np.vstack([n, n]), [h.offset, h.offset + 1.0 / t], [jump * t, -jump * t], 0.0, h.dim)


@dataclass
class ClosureRow:
    t: float
    err: float
    param_norm: float


def closure_curve(h: HalfSpace, jump: float, t_grid: Sequence[float], loss: LossSpec, m: Measure,
                  rule: VolumeRule = VolumeRule()) -> tuple[list[ClosureRow], float]:
    """Errors and parameter norms of the approximants, plus the error of the discontinuous limit."""
    from .response import step_response

    limit = step_response(h, jump) if jump != 0 else GeneralizedResponse(np.zeros(h.dim), 0.0)
    limit_err = error_functional(limit, loss, m, rule)
    rows = []
    for t in t_grid:
        net = discontinuity_approximant(h, jump, float(t))
        rows.append(ClosureRow(float(t), error_functional(net, loss, m, rule),
                               param_norm(from_effective(net).theta())))
    return rows, limit_err
