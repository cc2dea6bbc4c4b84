"""Measures with continuous densities on boxes, volume and hyperplane integrals.

Integrands are vectorised callables ``f(X) -> (N,)`` with ``X`` of shape
``(N, d_in)``.  When the caller knows where an integrand may fail to be
smooth it passes those hyperplanes as ``cuts``; for ``d_in <= 2`` the box is
then subdivided exactly along them and every cell gets its own Gauss rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .geometry import BoxDomain, HalfSpace, hyperplane_patch, NoIntersection
from .polygon import gauss_legendre, interval_rule, polygon_rule, split_polygons, clip_polygon
from .response import breaklines, evaluator

Field = Callable[[np.ndarray], np.ndarray]


class NonFiniteIntegrand(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# densities


class Density:
    kind = "abstract"

    def __call__(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params()}


class Uniform(Density):
    kind = "uniform"

    def __init__(self, domain: BoxDomain):
        self.value = 1.0 / domain.volume

    def __call__(self, X):
        return np.full(len(X), self.value)


class TruncatedGaussian(Density):
    """Isotropic Gaussian restricted to the box and renormalised."""

    kind = "truncated-gaussian"

    def __init__(self, domain: BoxDomain, center, sigma: float):
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (domain.dim,)).copy()
        self.sigma = float(sigma)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        z = ndtr((domain.upper - self.center) / self.sigma) - ndtr((domain.lower - self.center) / self.sigma)
        self.log_norm = float(np.sum(np.log(z)) + domain.dim * math.log(self.sigma * math.sqrt(2 * math.pi)))

    def __call__(self, X):
        r2 = np.sum((X - self.center) ** 2, axis=1)
        return np.exp(-0.5 * r2 / self.sigma ** 2 - self.log_norm)

    def params(self):
        return {"center": self.center.tolist(), "sigma": self.sigma}


class Bump(Density):
    """Smooth compactly supported bump ``exp(-1/(1-|x-c|^2/r^2))``, renormalised on the box."""

    kind = "bump"

    def __init__(self, domain: BoxDomain, center, radius: float):
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (domain.dim,)).copy()
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.scale = 1.0
        res = {1: 400, 2: 200}.get(domain.dim, 48)
        X, w = tensor_nodes(domain, res, "gauss")
        total = float(np.dot(w, self(X)))
        if total <= 0:
            raise ValueError("bump support does not meet the domain")
        self.scale = 1.0 / total

    def __call__(self, X):
        r2 = np.sum((X - self.center) ** 2, axis=1) / self.radius ** 2
        out = np.zeros(len(X))
        m = r2 < 1.0
        out[m] = np.exp(-1.0 / (1.0 - r2[m]))
        return self.scale * out

    def params(self):
        return {"center": self.center.tolist(), "radius": self.radius}


def make_density(spec: dict | None, domain: BoxDomain) -> Density:
    spec = dict(spec or {"kind": "uniform"})
    kind = spec.pop("kind", "uniform")
    if kind == "uniform":
        return Uniform(domain)
    if kind == "truncated-gaussian":
        return TruncatedGaussian(domain, spec.get("center", 0.0), spec.get("sigma", 1.0))
    if kind == "bump":
        return Bump(domain, spec.get("center", 0.0), spec.get("radius", 1.0))
    raise ValueError(f"unknown density {kind!r}")


@dataclass(frozen=True, eq=False)
class Measure:
    domain: BoxDomain
    density: Density

    @classmethod
    def uniform(cls, domain: BoxDomain) -> "Measure":
        return cls(domain, Uniform(domain))

    @property
    def dim(self) -> int:
        return self.domain.dim

    def h(self, X) -> np.ndarray:
        return self.density(np.atleast_2d(X))


@dataclass(frozen=True)
class VolumeRule:
    """``kind`` is one of tensor-gauss, midpoint, monte-carlo.

    ``resolution`` is points per axis (tensor rules) or the sample count;
    ``cell_order`` is the Gauss order per axis used inside each cell when
    the integrand's cuts are known.
    """

    kind: str = "tensor-gauss"
    resolution: int | None = None
    seed: int = 0
    cell_order: int = 10

    def __post_init__(self):
        if self.kind not in ("tensor-gauss", "midpoint", "monte-carlo"):
            raise ValueError(f"unknown volume rule {self.kind!r}")
        if self.kind != "monte-carlo" and self.resolution is not None and self.resolution < 2:
            raise ValueError("tensor rules need at least 2 points per axis")
        if self.cell_order < 1:
            raise ValueError("cell_order must be positive")

    def points_per_axis(self, dim: int) -> int:
        if self.resolution is not None:
            return int(self.resolution)
        if self.kind == "monte-carlo":
            return 100_000
        return 256 if dim <= 2 else 64


@dataclass(frozen=True)
class SurfaceRule:
    resolution: int = 32

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("surface rule resolution must be >= 2")


# ---------------------------------------------------------------------------
# node generation


def tensor_nodes(domain: BoxDomain, n: int, kind: str = "gauss") -> tuple[np.ndarray, np.ndarray]:
    if kind == "gauss":
        x, w = gauss_legendre(n)
    else:
        x = (np.arange(n) + 0.5) / n
        w = np.full(n, 1.0 / n)
    axes = [domain.lower[i] + (domain.upper[i] - domain.lower[i]) * x for i in range(domain.dim)]
    wts = [(domain.upper[i] - domain.lower[i]) * w for i in range(domain.dim)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    W = wts[0]
    for wi in wts[1:]:
        W = np.multiply.outer(W, wi)
    return X, W.ravel()


def _box_cells_2d(domain: BoxDomain, cuts: Sequence[HalfSpace]) -> list[np.ndarray]:
    lo, hi = domain.lower, domain.upper
    polys = [np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])]
    area_floor = 1e-28 * domain.volume
    for c in cuts:
        a, b = domain.projection_range(c.normal)
        if a < c.offset < b:
            polys = split_polygons(polys, c.normal, c.offset, area_floor)
    return polys


def cell_nodes(domain: BoxDomain, cuts: Sequence[HalfSpace], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights on the exact subdivision of a box (``d_in <= 2``)."""
    if domain.dim == 1:
        pts = [domain.lower[0], domain.upper[0]]
        for c in cuts:
            p = c.offset / c.normal[0]
            if domain.lower[0] < p < domain.upper[0]:
                pts.append(p)
        x, w = interval_rule(np.unique(pts), order)
        return x[:, None], w
    if domain.dim == 2:
        nodes, weights = [], []
        for poly in _box_cells_2d(domain, cuts):
            X, w = polygon_rule(poly, order)
            nodes.append(X)
            weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)
    raise ValueError("exact cell subdivision is implemented for d_in <= 2")


def volume_nodes(m: Measure, rule: VolumeRule, cuts: Sequence[HalfSpace] | None = None,
                 coarse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and density-weighted weights approximating integration against ``m``."""
    d = m.dim
    if rule.kind == "monte-carlo":
        n = rule.points_per_axis(d)
        rng = np.random.default_rng(rule.seed)
        X = rng.uniform(m.domain.lower, m.domain.upper, size=(n, d))
        w = np.full(n, m.domain.volume / n)
    elif cuts is not None and d <= 2:
        order = rule.cell_order
        if coarse:
            order = max(1, (order + 1) // 2)
        X, w = cell_nodes(m.domain, cuts, order)
    else:
        n = rule.points_per_axis(d)
        if coarse:
            n = max(1, n // 2)
        X, w = tensor_nodes(m.domain, n, "gauss" if rule.kind == "tensor-gauss" else "midpoint")
    return X, w * m.density(X)


def _checked(vals, name="integrand") -> np.ndarray:
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand(f"{name} returned non-finite values")
    return vals


def integrate_volume(f: Field, m: Measure, rule: VolumeRule = VolumeRule(),
                     cuts: Sequence[HalfSpace] | None = None) -> tuple[float, float]:
    """``∫ f h dx`` over the box and an error estimate.

    Tensor and cellwise rules estimate the error by halving the order;
    Monte-Carlo uses the sample standard error.
    """
    X, w = volume_nodes(m, rule, cuts)
    _checked(w, "density")
    fx = _checked(f(X))
    terms = w * fx
    value = float(np.sum(terms))
    floor = 64 * np.finfo(float).eps * float(np.sum(np.abs(terms)))
    if rule.kind == "monte-carlo":
        n = len(X)
        vol = m.domain.volume
        g = fx * m.density(X) * vol
        err = float(np.std(g, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
        return value, err
    Xc, wc = volume_nodes(m, rule, cuts, coarse=True)
    coarse = float(np.sum(wc * _checked(f(Xc))))
    return value, float(abs(value - coarse) + floor)


def error_functional(response, loss, m: Measure, rule: VolumeRule = VolumeRule()) -> float:
    """``∫ L(x, R(x)) dμ(x)`` for a response object or a plain callable.

    For networks, tuples and generalized responses the breaklines (and the
    loss's own cuts) are used to subdivide the domain.
    """
    ev = evaluator(response)
    cuts = None
    if response is not ev or getattr(response, "cuts", None) or getattr(loss, "cuts", None):
        cuts = list(breaklines(response)) + list(getattr(loss, "cuts", ()) or ())
    X, w = volume_nodes(m, rule, cuts)
    vals = _checked(loss.pointwise(X, _checked(ev(X), "response")), "loss")
    return float(np.sum(w * vals))


# ---------------------------------------------------------------------------
# hyperplane integrals


def surface_nodes(plane: HalfSpace, m: Measure, rule: SurfaceRule = SurfaceRule(),
                  cuts: Sequence[HalfSpace] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Points on ``plane ∩ box`` and Hausdorff-measure weights (density not applied)."""
    patch = hyperplane_patch(plane, m.domain)
    if patch.dim == 0:
        return patch.origin[None, :], np.ones(1)
    origin, T = patch.origin, patch.tangents
    if patch.dim == 1:
        pts = [patch.lower[0], patch.upper[0]]
        t = T[0]
        for c in cuts:
            den = float(c.normal @ t)
            if abs(den) < 1e-14:
                continue
            s = (c.offset - float(c.normal @ origin)) / den
            if patch.lower[0] < s < patch.upper[0]:
                pts.append(s)
        s, w = interval_rule(np.unique(pts), rule.resolution)
        return patch.to_ambient(s[:, None]), w
    polys = [patch.polygon]
    for c in cuts:
        a = T @ c.normal
        if np.linalg.norm(a) < 1e-14:
            continue
        polys = split_polygons(polys, a, c.offset - float(c.normal @ origin))
    S, W = [], []
    for poly in polys:
        s, w = polygon_rule(poly, rule.resolution)
        S.append(s)
        W.append(w)
    return patch.to_ambient(np.concatenate(S)), np.concatenate(W)


def integrate_surface(f: Field, plane: HalfSpace, m: Measure, rule: SurfaceRule = SurfaceRule(),
                      cuts: Sequence[HalfSpace] = ()) -> float:
    """``∫_{H ∩ box} f h dσ`` with σ the (d_in-1)-dimensional Hausdorff measure.

    In one dimension the hyperplane is a point and the integral is a
    density-weighted point evaluation.
    """
    X, w = surface_nodes(plane, m, rule, cuts)
    vals = _checked(f(X)) * _checked(m.density(X), "density")
    return float(np.sum(w * vals))


def hyperplane_mass(plane: HalfSpace, m: Measure, widths: Sequence[float],
                    order: int = 12) -> list[float]:
    """``μ({x : |n . x - o| < ε})`` for each half-width ε."""
    out = []
    for eps in widths:
        eps = float(eps)
        if eps < 0:
            raise ValueError("widths must be non-negative")
        if eps == 0.0:
            out.append(0.0)
            continue
        if m.dim <= 2:
            cuts = [HalfSpace(plane.normal, plane.offset - eps), HalfSpace(plane.normal, plane.offset + eps)]
            X, w = cell_nodes(m.domain, cuts, order)
            inside = np.abs(plane.signed_distance(X)) < eps
            out.append(float(np.sum(w * inside * m.density(X))))
        else:
            out.append(_slab_by_slices(plane, m, eps, order))
    return out


def _slab_by_slices(plane: HalfSpace, m: Measure, eps: float, order: int) -> float:
    x, w = gauss_legendre(order)
    total = 0.0
    for xi, wi in zip(x, w):
        s = -eps + 2 * eps * xi
        try:
            val = integrate_surface(lambda X: np.ones(len(X)), HalfSpace(plane.normal, plane.offset + s), m,
                                    SurfaceRule(order))
        except NoIntersection:
            val = 0.0
        total += 2 * eps * wi * val
    return total


def charges_plane(plane: HalfSpace, m: Measure, rule: SurfaceRule = SurfaceRule(16)) -> bool:
    """Whether the density is positive somewhere on ``plane ∩ box`` (sampled).

    This is only the sufficient density-positivity condition; the regularity
    of individual points on the plane is not checked.
    """
    try:
        X, _ = surface_nodes(plane, m, rule)
    except NoIntersection:
        return False
    return bool(np.any(m.density(X) > 0.0))


def box_cells(domain: BoxDomain, cuts: Sequence[HalfSpace]) -> list[np.ndarray]:
    """Convex cells of a planar box cut along ``cuts`` (vertex arrays)."""
    if domain.dim != 2:
        raise ValueError("box_cells is planar")
    return _box_cells_2d(domain, cuts)


__all__ = [
    "Density", "Uniform", "TruncatedGaussian", "Bump", "make_density", "Measure", "VolumeRule",
    "SurfaceRule", "tensor_nodes", "cell_nodes", "volume_nodes", "integrate_volume", "error_functional",
    "surface_nodes", "integrate_surface", "hyperplane_mass", "charges_plane", "box_cells", "NonFiniteIntegrand",
    "clip_polygon",
]
