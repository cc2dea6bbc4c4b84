"""Half-spaces, box domains, sampled arrangement cells and hyperplane charts."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import qmc

TOL_BOUNDARY = 1e-12
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    pass


class DuplicateBoundary(GeometryError):
    pass


class NoIntersection(GeometryError):
    pass


class Side(Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def unit_vector(v) -> np.ndarray:
    """Return ``v`` as a float array after checking it has unit length."""
    arr = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError("unit vector must be a non-empty 1-d array")
    if abs(np.linalg.norm(arr) - 1.0) > UNIT_TOL:
        raise GeometryError(f"vector {arr} is not unit length")
    arr.setflags(write=False)
    return arr


def normalize(v) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    n = np.linalg.norm(arr)
    if n == 0:
        raise GeometryError("cannot normalize the zero vector")
    return arr / n


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Open half-space ``{x : normal . x > offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", unit_vector(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal(cls, direction, offset=0.0) -> "HalfSpace":
        """Build from an arbitrary nonzero direction, rescaling the offset with it."""
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        n = np.linalg.norm(d)
        if n == 0:
            raise GeometryError("zero normal")
        return cls(d / n, float(offset) / n)

    @property
    def dim(self) -> int:
        return self.normal.size

    def signed_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.normal - self.offset

    def opposite(self) -> "HalfSpace":
        return HalfSpace(-self.normal, -self.offset)

    def same_boundary(self, other: "HalfSpace", tol: float = 1e-10) -> bool:
        if other.dim != self.dim:
            return False
        if np.allclose(self.normal, other.normal, atol=tol, rtol=0) and abs(self.offset - other.offset) <= tol:
            return True
        return bool(
            np.allclose(self.normal, -other.normal, atol=tol, rtol=0)
            and abs(self.offset + other.offset) <= tol
        )

    def __eq__(self, other):
        if not isinstance(other, HalfSpace):
            return NotImplemented
        return bool(np.array_equal(self.normal, other.normal) and self.offset == other.offset)

    def __hash__(self):
        return hash((self.normal.tobytes(), self.offset))

    def __repr__(self):
        return f"HalfSpace(normal={self.normal.tolist()}, offset={self.offset!r})"


def side(h: HalfSpace, x) -> Side:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise GeometryError("point must be finite")
    s = float(h.signed_distance(x))
    if s > TOL_BOUNDARY:
        return Side.INSIDE
    if s < -TOL_BOUNDARY:
        return Side.OUTSIDE
    return Side.BOUNDARY


def inside_mask(h: HalfSpace, X: np.ndarray) -> np.ndarray:
    """Vectorised strict membership (boundary band counts as outside)."""
    return h.signed_distance(X) > TOL_BOUNDARY


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise GeometryError("lower and upper must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise GeometryError("box requires lower < upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lo: float = -1.0, hi: float = 1.0) -> "BoxDomain":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def vertices(self) -> np.ndarray:
        d = self.dim
        corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
        return self.lower + corners * (self.upper - self.lower)

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=-1)

    def projection_range(self, normal) -> tuple[float, float]:
        vals = self.vertices() @ np.asarray(normal, dtype=float)
        return float(vals.min()), float(vals.max())

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __repr__(self):
        return f"BoxDomain(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True)
class CellSignature:
    """Membership pattern; ``membership[k]`` is True when inside half-space k."""

    membership: tuple[bool, ...]

    def __len__(self):
        return len(self.membership)

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.membership) if m)

    def __str__(self):
        return "".join("1" if m else "0" for m in self.membership) or "-"


def check_distinct_boundaries(halfspaces: Sequence[HalfSpace]) -> None:
    for i in range(len(halfspaces)):
        for j in range(i + 1, len(halfspaces)):
            if halfspaces[i].same_boundary(halfspaces[j]):
                raise DuplicateBoundary(f"half-spaces {i} and {j} share a boundary hyperplane")


def sample_box(domain: BoxDomain, n: int, seed: int | None = 0) -> np.ndarray:
    """Scrambled Sobol points in the box (quasi-uniform, reproducible)."""
    sampler = qmc.Sobol(d=domain.dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    u = sampler.random_base2(m)[:n]
    return qmc.scale(u, domain.lower, domain.upper)


def enumerate_cells(halfspaces: Sequence[HalfSpace], domain: BoxDomain, samples: int = 100_000,
                    seed: int | None = 0) -> list[tuple[CellSignature, float]]:
    """Sampled arrangement cells with Monte-Carlo measure estimates.

    Every sample is assigned to exactly one signature (boundary points count
    as outside).  Signatures are returned in lexicographic order.
    """
    check_distinct_boundaries(halfspaces)
    if not halfspaces:
        return [(CellSignature(()), domain.volume)]
    X = sample_box(domain, samples, seed)
    M = np.column_stack([inside_mask(h, X) for h in halfspaces])
    patterns, counts = np.unique(M, axis=0, return_counts=True)
    vol = domain.volume
    out = [
        (CellSignature(tuple(bool(b) for b in p)), vol * c / len(X))
        for p, c in zip(patterns, counts)
    ]
    out.sort(key=lambda t: t[0].membership)
    return out


def cell_samples(halfspaces: Sequence[HalfSpace], sig: CellSignature, X: np.ndarray) -> np.ndarray:
    """Rows of ``X`` lying in the cell ``sig``."""
    mask = np.ones(len(X), dtype=bool)
    for h, m in zip(halfspaces, sig.membership):
        mask &= inside_mask(h, X) == m
    return X[mask]


# ---------------------------------------------------------------------------
# hyperplane charts


def orthonormal_complement(normal: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of the hyperplane direction space."""
    d = normal.size
    if d == 1:
        return np.zeros((0, 1))
    if d == 2:
        return np.array([[-normal[1], normal[0]]])
    _, _, vt = np.linalg.svd(normal[None, :])
    return vt[1:]


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    """Affine chart ``x = origin + params @ tangents`` of a hyperplane.

    ``polygon`` holds the vertices (in chart coordinates) of the convex
    section of the box; for a 1-d chart it is the parameter interval and for
    a 0-d chart it is empty.
    """

    origin: np.ndarray
    tangents: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    polygon: np.ndarray

    @property
    def dim(self) -> int:
        return self.tangents.shape[0]

    def to_ambient(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1, self.dim)
        return self.origin + params @ self.tangents


def _plane_box_section(origin, tangents, domain: BoxDomain) -> np.ndarray:
    """Chart-coordinate vertices of the convex polygon plane ∩ box (2-d charts)."""
    from .polygon import clip_polygon

    # start from a large square in chart coordinates and clip by the 2*d box faces
    R = 2.0 * domain.diameter + np.linalg.norm(origin)
    poly = np.array([[-R, -R], [R, -R], [R, R], [-R, R]], dtype=float)
    for k in range(domain.dim):
        a = tangents[:, k]
        # x_k = origin_k + a . s  must satisfy lower_k <= x_k <= upper_k
        poly = clip_polygon(poly, a, domain.upper[k] - origin[k])
        poly = clip_polygon(poly, -a, origin[k] - domain.lower[k])
        if len(poly) == 0:
            break
    return poly


def hyperplane_patch(h: HalfSpace, domain: BoxDomain) -> SurfacePatch:
    """Chart covering ``∂h ∩ domain``; raises NoIntersection if it misses the open box."""
    if h.dim != domain.dim:
        raise GeometryError("dimension mismatch between half-space and domain")
    lo, hi = domain.projection_range(h.normal)
    if not (lo < h.offset < hi) or min(h.offset - lo, hi - h.offset) <= TOL_BOUNDARY:
        raise NoIntersection(f"hyperplane {h!r} does not meet the interior of {domain!r}")
    n = h.normal
    origin = h.offset * n
    T = orthonormal_complement(n)
    k = T.shape[0]
    if k == 0:
        empty = np.zeros(0)
        return SurfacePatch(origin, T, empty, empty, np.zeros((0, 0)))
    if k == 1:
        t = T[0]
        smin, smax = -np.inf, np.inf
        for i in range(domain.dim):
            if abs(t[i]) < 1e-15:
                continue
            a = (domain.lower[i] - origin[i]) / t[i]
            b = (domain.upper[i] - origin[i]) / t[i]
            smin = max(smin, min(a, b))
            smax = min(smax, max(a, b))
        if not smin < smax:
            raise NoIntersection(f"hyperplane {h!r} does not meet the interior of {domain!r}")
        return SurfacePatch(origin, T, np.array([smin]), np.array([smax]), np.array([[smin], [smax]]))
    if k == 2:
        poly = _plane_box_section(origin, T, domain)
        if len(poly) < 3:
            raise NoIntersection(f"hyperplane {h!r} does not meet the interior of {domain!r}")
        return SurfacePatch(origin, T, poly.min(axis=0), poly.max(axis=0), poly)
    raise GeometryError("hyperplane charts are implemented for d_in <= 3")
