"""Convex polygon clipping and Gauss rules on intervals and triangles."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_EPS = 1e-14


def clip_polygon(poly: np.ndarray, a, c: float) -> np.ndarray:
    """Keep the part of convex ``poly`` (vertices in order) with ``a . p <= c``."""
    if len(poly) == 0:
        return poly
    a = np.asarray(a, dtype=float)
    vals = poly @ a - c
    if np.all(vals <= _EPS):
        return poly
    if np.all(vals >= -_EPS):
        return np.zeros((0, poly.shape[1]))
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            s = vp / (vp - vq)
            out.append(p + s * (q - p))
    return np.array(out) if out else np.zeros((0, poly.shape[1]))


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def split_polygons(polys: list[np.ndarray], a, c: float, min_area: float = 1e-300) -> list[np.ndarray]:
    """Cut every convex polygon along the line ``a . p = c``."""
    out = []
    for poly in polys:
        for part in (clip_polygon(poly, a, c), clip_polygon(poly, -np.asarray(a), -c)):
            if len(part) >= 3 and polygon_area(part) > min_area:
                out.append(part)
    return out


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) tensor Gauss rule on the unit triangle.

    Returns barycentric-style coordinates ``(u, v)`` with ``u, v >= 0,
    u + v <= 1`` and weights summing to 1/2.
    """
    x, w = gauss_legendre(n)
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    u = U.ravel()
    v = (V * (1.0 - U)).ravel()
    wt = (WU * WV * (1.0 - U)).ravel()
    return np.column_stack([u, v]), wt


def polygon_rule(poly: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights on a convex polygon by fan triangulation."""
    uv, w = triangle_rule(order)
    nodes, weights = [], []
    p0 = poly[0]
    for i in range(1, len(poly) - 1):
        e1 = poly[i] - p0
        e2 = poly[i + 1] - p0
        jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        if jac == 0.0:
            continue
        nodes.append(p0 + uv[:, :1] * e1 + uv[:, 1:] * e2)
        weights.append(w * jac)
    if not nodes:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def interval_rule(breaks, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on consecutive intervals of the sorted ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(order)
    lengths = np.diff(breaks)
    keep = lengths > 0
    a = breaks[:-1][keep]
    L = lengths[keep]
    nodes = (a[:, None] + L[:, None] * x[None, :]).ravel()
    weights = (L[:, None] * w[None, :]).ravel()
    return nodes, weights
