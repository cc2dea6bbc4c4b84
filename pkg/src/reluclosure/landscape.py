"""Losses, gradient-descent training over network parameters, a search oracle
and divergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .geometry import HalfSpace
from .quadrature import Measure, VolumeRule, error_functional, integrate_volume, volume_nodes
from .response import EffectiveTuple, NetworkConfig, from_effective, to_effective


class BadExponent(ValueError):
    pass


class NonFiniteLoss(ArithmeticError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class BudgetExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# targets


class Target:
    """Vectorised target ``f(X)`` that knows its non-smooth hyperplanes."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], cuts=(), spec: dict | None = None):
        self.fn = fn
        self.cuts = list(cuts)
        self.spec = spec or {"kind": "custom"}

    def __call__(self, X):
        return self.fn(np.atleast_2d(np.asarray(X, dtype=float)))


def _axis_plane(d_in: int, axis: int, value: float) -> HalfSpace:
    e = np.zeros(d_in)
    e[axis] = 1.0
    return HalfSpace(e, value)


def make_target(spec: dict, d_in: int) -> Target:
    """Target from the registry: abs, ramp, quadratic, piecewise-linear, constant, affine, step."""
    spec = dict(spec)
    kind = spec.get("kind")
    if kind == "abs":
        return Target(lambda X: np.abs(X).sum(axis=1), [_axis_plane(d_in, i, 0.0) for i in range(d_in)], spec)
    if kind == "ramp":
        a = float(spec.get("a", 0.0))
        return Target(lambda X: np.maximum(X[:, 0] - a, 0.0), [_axis_plane(d_in, 0, a)], spec)
    if kind == "quadratic":
        return Target(lambda X: np.sum(X * X, axis=1), (), spec)
    if kind == "piecewise-linear":
        knots = np.asarray(spec["knots"], dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 2:
            raise ValueError("piecewise-linear knots must be a list of [x, y] pairs")
        knots = knots[np.argsort(knots[:, 0])]
        xs, ys = knots[:, 0], knots[:, 1]
        return Target(lambda X: np.interp(X[:, 0], xs, ys), [_axis_plane(d_in, 0, x) for x in xs], spec)
    if kind == "constant":
        c = float(spec.get("value", 0.0))
        return Target(lambda X: np.full(len(X), c), (), spec)
    if kind == "affine":
        coef = np.broadcast_to(np.asarray(spec.get("coef", 0.0), dtype=float), (d_in,)).copy()
        c = float(spec.get("const", 0.0))
        return Target(lambda X: X @ coef + c, (), spec)
    if kind == "step":
        h = HalfSpace.from_normal(spec.get("normal", [1.0] + [0.0] * (d_in - 1)), spec.get("offset", 0.0))
        jump = float(spec.get("jump", 1.0))
        return Target(lambda X: jump * (h.signed_distance(X) > 0), [h], spec)
    raise ValueError(f"unknown target kind {kind!r}")


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True, eq=False)
class LossSpec:
    """Pointwise loss ``L(x, y)`` (vectorised over rows of x) with its declared properties."""

    pointwise: Callable[[np.ndarray, np.ndarray], np.ndarray]
    convex_in_y: bool = True
    attains_min: bool = True
    strictly_convex: bool = False
    p: float | None = None
    target: Target | None = None
    cuts: tuple = ()
    name: str = "custom"

    def __call__(self, X, y):
        return self.pointwise(np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float))


def lp_loss(f, p: float) -> LossSpec:
    """``L(x, y) = |y - f(x)|^p`` for ``p > 1``."""
    p = float(p)
    if not p > 1.0:
        raise BadExponent(f"Lp loss needs p > 1, got {p}")
    if not isinstance(f, Target):
        f = Target(f)

    def pointwise(X, y):
        r = np.abs(y - f(X))
        return r * r if p == 2.0 else r ** p

    return LossSpec(pointwise, True, True, True, p, f, tuple(f.cuts), f"L{p:g}")


def abs_loss(f) -> LossSpec:
    """``|y - f(x)|``: convex but not strictly convex."""
    if not isinstance(f, Target):
        f = Target(f)
    return LossSpec(lambda X, y: np.abs(y - f(X)), True, True, False, None, f, tuple(f.cuts), "L1")


@dataclass
class AuditReport:
    violations: list[tuple[str, str]] = field(default_factory=list)
    checked_points: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {k for k, _ in self.violations}

    def __str__(self):
        if self.ok:
            return f"loss audit: clean ({self.checked_points} points)"
        lines = [f"loss audit: {len(self.violations)} violation(s)"]
        for kind in sorted(self.kinds()):
            msgs = [m for k, m in self.violations if k == kind]
            lines.append(f"  {kind}: {len(msgs)} (first: {msgs[0]})")
        return "\n".join(lines)


def loss_audit(loss: LossSpec, m: Measure, samples: int = 32, seed: int = 0,
               y_grid=None) -> AuditReport:
    """Numerical spot-checks of strict convexity, coercivity and minimum attainment in y."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(m.domain.lower, m.domain.upper, size=(samples, m.dim))
    ys = np.linspace(-5.0, 5.0, 21) if y_grid is None else np.asarray(y_grid, dtype=float)
    i, k = np.triu_indices(len(ys), 1)
    rep = AuditReport(checked_points=samples)

    def L(x, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return loss.pointwise(np.repeat(x[None, :], len(y), axis=0), y)

    for x in xs:
        Lg = L(x, ys)
        avg = 0.5 * (Lg[i] + Lg[k])
        mid = L(x, 0.5 * (ys[i] + ys[k]))
        tol = 1e-12 * np.maximum(1.0, np.abs(avg))
        if np.any(mid > avg + tol):
            rep.violations.append(("convexity", f"midpoint above chord at x={x.tolist()}"))
        if np.any(mid >= avg - tol):
            j = int(np.argmax(mid >= avg - tol))
            rep.violations.append(("strict_convexity",
                                   f"L(x,·) affine between y={ys[i[j]]:g} and y={ys[k[j]]:g} at x={x.tolist()}"))
        for sgn in (1.0, -1.0):
            tail = L(x, sgn * np.array([10.0, 100.0, 1000.0]))
            if not (tail[1] > tail[0] and tail[2] > tail[1]):
                rep.violations.append(("coercivity", f"L(x, {'+' if sgn > 0 else '-'}Y) not increasing at x={x.tolist()}"))
        Y = 1000.0
        res = minimize_scalar(lambda y: float(L(x, y)[0]), bounds=(-Y, Y), method="bounded",
                              options={"xatol": 1e-6})
        if Y - abs(res.x) < 1e-3 * Y:
            rep.violations.append(("attains_min", f"no interior minimum in [-{Y:g}, {Y:g}] at x={x.tolist()}"))
    return rep


# ---------------------------------------------------------------------------
# error and gradient over the flat parameter vector


def network_cuts(W1: np.ndarray, b1: np.ndarray) -> list[HalfSpace]:
    out = []
    for w, b in zip(W1, b1):
        n = np.linalg.norm(w)
        if n > 0:
            out.append(HalfSpace(w / n, -b / n))
    return out


def _nodes_for(cfg: NetworkConfig, loss: LossSpec, m: Measure, rule: VolumeRule):
    if rule.kind == "monte-carlo":
        return volume_nodes(m, rule)
    if m.dim == 1 and rule.kind != "monte-carlo":
        # fast path: breakpoints directly from the raw weights
        from .polygon import interval_rule

        w = cfg.W1[:, 0]
        nz = w != 0
        pts = np.concatenate([[m.domain.lower[0], m.domain.upper[0]], -cfg.b1[nz] / w[nz],
                              [c.offset * c.normal[0] for c in loss.cuts]])
        lo, hi = m.domain.lower[0], m.domain.upper[0]
        pts = np.unique(pts[(pts >= lo) & (pts <= hi)])
        x, wt = interval_rule(pts, rule.cell_order)
        X = x[:, None]
        return X, wt * m.density(X)
    if m.dim == 2:
        return volume_nodes(m, rule, network_cuts(cfg.W1, cfg.b1) + list(loss.cuts))
    return volume_nodes(m, rule)


def error_and_gradient(theta, d: int, loss: LossSpec, m: Measure,
                       rule: VolumeRule = VolumeRule()) -> tuple[float, np.ndarray]:
    """Error functional at ``theta`` and its gradient, differentiating under the integral.

    The response is continuous in x, so the moving cell boundaries contribute
    nothing and the gradient is the integral of ``∂L/∂y · ∂R/∂θ``.
    """
    cfg = NetworkConfig.from_theta(theta, d, m.dim)
    X, w = _nodes_for(cfg, loss, m, rule)
    if loss.p is not None and loss.target is not None:
        err, gW1, gb1, gW2, gb2 = kernels.lp_loss_grad(X, w, loss.target(X), cfg.W1, cfg.b1, cfg.W2, cfg.b2,
                                                       loss.p)
        return err, np.concatenate([np.ravel(gW1), gb1, gW2, [gb2]])
    # generic loss: numerical derivative in y only
    y = kernels.hinge_forward(X, cfg.W1, cfg.b1, cfg.W2, cfg.b2)
    L = loss.pointwise(X, y)
    hy = 1e-6 * np.maximum(1.0, np.abs(y))
    dy = w * (loss.pointwise(X, y + hy) - loss.pointwise(X, y - hy)) / (2 * hy)
    A = X @ cfg.W1.T + cfg.b1
    R = np.maximum(A, 0.0)
    G = (A > 0) * (dy[:, None] * cfg.W2[None, :])
    grad = np.concatenate([(G.T @ X).ravel(), G.sum(axis=0), R.T @ dy, [dy.sum()]])
    return float(np.sum(w * L)), grad


def error_at(theta, d: int, loss: LossSpec, m: Measure, rule: VolumeRule = VolumeRule()) -> float:
    cfg = NetworkConfig.from_theta(theta, d, m.dim)
    X, w = _nodes_for(cfg, loss, m, rule)
    y = kernels.hinge_forward(X, cfg.W1, cfg.b1, cfg.W2, cfg.b2)
    return float(np.sum(w * loss.pointwise(X, y)))


def fd_gradient(fun, theta, step: float = 1e-6) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * step)
    return g


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    d: int
    step_size: float = 0.05
    steps: int = 1000
    seed: int = 0
    scale: float = 0.1
    init: str = "geometric"
    gradient: str = "analytic"
    quadrature: VolumeRule = VolumeRule()
    snapshot_every: int = 1000
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("d must be non-negative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.gradient not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if self.init not in ("geometric", "zero"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class Trajectory:
    step: np.ndarray
    err: np.ndarray
    param_norm: np.ndarray
    grad_norm: np.ndarray
    snapshots: list[tuple[int, EffectiveTuple]] = field(default_factory=list)

    def __len__(self):
        return len(self.step)

    def rows(self):
        return zip(self.step.tolist(), self.err.tolist(), self.param_norm.tolist())


def param_norm(theta) -> float:
    """Largest absolute parameter (the sup-norm of the flat weight vector)."""
    theta = np.asarray(theta, dtype=float)
    return float(np.max(np.abs(theta))) if theta.size else 0.0


def target_mean(loss: LossSpec, m: Measure, rule: VolumeRule = VolumeRule()) -> float:
    if loss.target is None:
        return 0.0
    cuts = list(loss.cuts) if m.dim <= 2 else None
    num, _ = integrate_volume(loss.target, m, rule, cuts)
    mass, _ = integrate_volume(lambda X: np.ones(len(X)), m, rule, cuts)
    return num / mass


def best_constant(loss: LossSpec, m: Measure, rule: VolumeRule = VolumeRule()) -> tuple[float, float]:
    """Optimal zero-neuron response and its error (closed form for p = 2)."""
    if loss.p == 2.0 and loss.target is not None:
        c = target_mean(loss, m, rule)
    else:
        def err(c):
            return error_functional(lambda X: np.full(len(X), c), loss, m, rule)

        lo, hi = -1e3, 1e3
        if loss.target is not None:
            X, _ = volume_nodes(m, VolumeRule("tensor-gauss", 16))
            vals = loss.target(X)
            lo, hi = float(vals.min()) - 1.0, float(vals.max()) + 1.0
        c = float(minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}).x)
    return c, error_functional(lambda X: np.full(len(X), c), loss, m, rule)


def initial_tuple(cfg: TrainConfig, loss: LossSpec, m: Measure) -> EffectiveTuple:
    """Breaklines through the domain, Gaussian kinks, bias at the target mean."""
    rng = np.random.default_rng(cfg.seed)
    d, d_in = cfg.d, m.dim
    if cfg.init == "zero":
        return EffectiveTuple(np.tile(np.eye(d_in)[:1], (d, 1)), np.zeros(d), np.zeros(d), 0.0, d_in)
    normals = rng.standard_normal((d, d_in))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = np.array([rng.uniform(*m.domain.projection_range(n)) for n in normals])
    kinks = cfg.scale * rng.standard_normal(d)
    return EffectiveTuple(normals, offsets, kinks, target_mean(loss, m, cfg.quadrature), d_in)


def train(cfg: TrainConfig, loss: LossSpec, m: Measure, theta0=None) -> tuple[EffectiveTuple, Trajectory]:
    """Plain gradient descent on the flat parameters; returns the best-seen tuple."""
    d = cfg.d
    if theta0 is None:
        cfg0 = from_effective(initial_tuple(cfg, loss, m))
        if cfg.init == "zero":
            cfg0 = NetworkConfig(np.zeros((d, m.dim)), np.zeros(d), np.zeros(d), 0.0, m.dim)
        theta = cfg0.theta()
    else:
        theta = np.array(theta0, dtype=float)
    rule = cfg.quadrature
    n = cfg.steps
    errs = np.empty(n)
    norms = np.empty(n)
    gnorms = np.empty(n)
    snaps = []
    best_err, best_theta = math.inf, theta.copy()

    def fun(th):
        return error_at(th, d, loss, m, rule)

    for k in range(n):
        # overflow is reported below as NonFiniteLoss, not as float warnings
        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.gradient == "analytic":
                err, g = error_and_gradient(theta, d, loss, m, rule)
            else:
                err, g = fun(theta), fd_gradient(fun, theta, cfg.fd_step)
        if not (math.isfinite(err) and np.all(np.isfinite(g))):
            traj = Trajectory(np.arange(k), errs[:k], norms[:k], gnorms[:k], snaps)
            raise NonFiniteLoss(f"non-finite loss or gradient at step {k}", traj)
        errs[k], norms[k], gnorms[k] = err, param_norm(theta), float(np.linalg.norm(g))
        if err < best_err:
            best_err, best_theta = err, theta.copy()
        if k % cfg.snapshot_every == 0:
            snaps.append((k, to_effective(NetworkConfig.from_theta(theta, d, m.dim))))
        theta = theta - cfg.step_size * g
    traj = Trajectory(np.arange(n), errs, norms, gnorms, snaps)
    return to_effective(NetworkConfig.from_theta(best_theta, d, m.dim)), traj


# ---------------------------------------------------------------------------
# oracle


def _tuple_from_coords(z, d: int, d_in: int, signs=None) -> EffectiveTuple:
    if d_in == 1:
        normals = np.asarray(signs, dtype=float).reshape(d, 1)
        offsets, kinks = z[:d], z[d:2 * d]
    else:
        ang = z[:d]
        normals = np.column_stack([np.cos(ang), np.sin(ang)])
        offsets, kinks = z[d:2 * d], z[2 * d:3 * d]
    return EffectiveTuple(normals, offsets, kinks, z[-1], d_in)


def _coords_from_tuple(t: EffectiveTuple) -> tuple[np.ndarray, np.ndarray | None]:
    if t.d_in == 1:
        return np.concatenate([t.offsets, t.kinks, [t.bias]]), np.sign(t.normals[:, 0])
    ang = np.arctan2(t.normals[:, 1], t.normals[:, 0])
    return np.concatenate([ang, t.offsets, t.kinks, [t.bias]]), None


class _Budget:
    def __init__(self, n):
        self.left = n

    def take(self):
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _pattern_search(fun, z0, f0, step0, budget: _Budget, tol=1e-7):
    z, fz = z0.copy(), f0
    steps = np.full(z.size, step0)
    while np.max(steps) > tol:
        for i in range(z.size):
            if steps[i] <= tol:
                continue
            moved = False
            for sgn in (1.0, -1.0):
                if not budget.take():
                    return z, fz
                trial = z.copy()
                trial[i] += sgn * steps[i]
                ft = fun(trial)
                if ft < fz:
                    z, fz, moved = trial, ft, True
                    steps[i] *= 2.0
                    break
            if not moved:
                steps[i] *= 0.5
    return z, fz


def oracle_path(d_max: int, loss: LossSpec, m: Measure, budget: int = 8000, seed: int = 0,
                rule: VolumeRule = VolumeRule(), restarts: int = 6) -> list[tuple[float, EffectiveTuple]]:
    """Best errors and tuples for widths ``0..d_max`` from one warm-started search chain.

    ``budget`` counts error evaluations per width.  Width k starts from the
    width k-1 optimum padded with a zero-kink neuron (plus random restarts),
    so errors are non-increasing along the chain, and a shorter chain with
    the same seed is a prefix of a longer one.
    """
    d_in = m.dim
    if d_max > 2 or d_in > 2:
        raise ValueError("the oracle is limited to d <= 2 and d_in <= 2")
    if budget < 2 * ((d_in + 2) * d_max + 1) + 1:
        raise BudgetExceeded(f"budget {budget} is smaller than one coordinate sweep")
    rng = np.random.default_rng(seed)
    lo, hi = m.domain.lower, m.domain.upper
    rad = 0.5 * m.domain.diameter

    def err_of(t: EffectiveTuple) -> float:
        return error_functional(t, loss, m, rule)

    best_t = EffectiveTuple(np.zeros((0, d_in)), [], [], target_mean(loss, m, rule), d_in)
    best_e = err_of(best_t)
    path = []
    for k in range(d_max + 1):
        bud = _Budget(budget)
        starts = []
        if k == 0:
            starts.append(best_t)
        else:
            n_new = rng.standard_normal(d_in)
            n_new /= np.linalg.norm(n_new)
            starts.append(EffectiveTuple(np.vstack([best_t.normals, n_new]),
                                         np.append(best_t.offsets, rng.uniform(-0.5, 0.5) * rad),
                                         np.append(best_t.kinks, 0.0), best_t.bias, d_in))
            for _ in range(restarts):
                normals = rng.standard_normal((k, d_in))
                normals /= np.linalg.norm(normals, axis=1, keepdims=True)
                offsets = np.array([rng.uniform(*m.domain.projection_range(n)) for n in normals])
                starts.append(EffectiveTuple(normals, offsets, rng.standard_normal(k), best_t.bias, d_in))
            if d_in == 1:
                # every sign pattern gets at least one start
                for signs in np.array(np.meshgrid(*[[1.0, -1.0]] * k)).reshape(k, -1).T:
                    offs = rng.uniform(lo[0], hi[0], size=k) * signs
                    starts.append(EffectiveTuple(signs[:, None], offs, rng.standard_normal(k), best_t.bias, 1))
        share = max(1, bud.left // (2 * len(starts)))
        for t0 in starts:
            z0, signs = _coords_from_tuple(t0)

            def fun(z, signs=signs, k=k):
                return err_of(_tuple_from_coords(z, k, d_in, signs))

            allowance = min(share, bud.left)
            local = _Budget(allowance)
            if not local.take():
                break
            z, fz = _pattern_search(fun, z0, fun(z0), 0.25, local)
            bud.left -= allowance - local.left
            if fz < best_e or (k > best_t.width and fz <= best_e):
                best_e, best_t = fz, _tuple_from_coords(z, k, d_in, signs)
        if best_t.width < k:
            # keep the chain at width k even if no start improved
            starts0 = starts[0]
            best_t = starts0 if err_of(starts0) <= best_e else best_t
        if bud.left > 0 and best_t.width == k:
            z0, signs = _coords_from_tuple(best_t)

            def fun(z, signs=signs, k=k):
                return err_of(_tuple_from_coords(z, k, d_in, signs))

            z, fz = _pattern_search(fun, z0, best_e, 0.05, bud)
            if fz < best_e:
                best_e, best_t = fz, _tuple_from_coords(z, k, d_in, signs)
        path.append((best_e, best_t))
    return path


def oracle_min(d: int, loss: LossSpec, m: Measure, budget: int = 8000, seed: int = 0,
               rule: VolumeRule = VolumeRule(), restarts: int = 6) -> tuple[float, EffectiveTuple]:
    """Best error found for width ``d`` (reference upper bound for training)."""
    return oracle_path(d, loss, m, budget, seed, rule, restarts)[-1]


# ---------------------------------------------------------------------------
# diagnostics


def divergence_report(traj: Trajectory) -> str:
    """One of ``converged``, ``plateau_with_norm_blowup``, ``undecided``."""
    n = len(traj)
    if n < 100:
        raise ValueError("divergence_report needs a trajectory of at least 100 steps")
    mid = n // 2
    err_drop = traj.err[mid] - traj.err[-1]
    growth = traj.param_norm[-1] / max(traj.param_norm[mid], 1e-300)
    if err_drop < 1e-6 and growth >= 10.0:
        return "plateau_with_norm_blowup"
    if traj.grad_norm[-1] < 1e-6 and growth < 10.0:
        return "converged"
    return "undecided"
