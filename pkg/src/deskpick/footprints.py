"""Convex footprint polygons in the table plane.

Footprints are (N, 2) float arrays of counter-clockwise convex polygon
vertices. Circles are approximated by regular 24-gons. Overlap uses the
separating-axis test; touching polygons count as overlapping.
"""

from __future__ import annotations

import math

import numpy as np

CIRCLE_SEGMENTS = 24


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, CCW, no repeated last vertex."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross2(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(iterable):
        out: list[np.ndarray] = []
        for p in iterable:
            while len(out) >= 2 and cross2(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def oriented_rect(cx: float, cy: float, width: float, depth: float,
                  yaw: float) -> np.ndarray:
    """CCW rectangle with half-sides width/2 along yaw, depth/2 across."""
    u = np.array([math.cos(yaw), math.sin(yaw)])
    v = np.array([-math.sin(yaw), math.cos(yaw)])
    c = np.array([cx, cy])
    hw, hd = width / 2.0, depth / 2.0
    return np.array([c - hw * u - hd * v, c + hw * u - hd * v,
                     c + hw * u + hd * v, c - hw * u + hd * v])


def circle_polygon(cx: float, cy: float, radius: float,
                   segments: int = CIRCLE_SEGMENTS) -> np.ndarray:
    ang = np.arange(segments) * (2 * math.pi / segments)
    return np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)


def project_onto_axis(poly: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    proj = poly @ np.asarray(axis, dtype=float)
    return float(proj.min()), float(proj.max())


def _edge_normals(poly: np.ndarray) -> np.ndarray:
    edges = np.roll(poly, -1, axis=0) - poly
    return np.stack([edges[:, 1], -edges[:, 0]], axis=1)


def polygons_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis overlap test for convex polygons (touching counts)."""
    for normals in (_edge_normals(a), _edge_normals(b)):
        for n in normals:
            ln = np.linalg.norm(n)
            if ln < 1e-15:
                continue
            n = n / ln
            a_lo, a_hi = project_onto_axis(a, n)
            b_lo, b_hi = project_onto_axis(b, n)
            if a_hi < b_lo or b_hi < a_lo:
                return False
    return True


def point_in_polygon(point: np.ndarray, poly: np.ndarray) -> bool:
    """Point membership in a convex CCW polygon (boundary counts as inside)."""
    p = np.asarray(point, dtype=float)
    nxt = np.roll(poly, -1, axis=0)
    cross = (nxt[:, 0] - poly[:, 0]) * (p[1] - poly[:, 1]) - \
            (nxt[:, 1] - poly[:, 1]) * (p[0] - poly[:, 0])
    return bool(np.all(cross >= -1e-12))


def distance_to_polygon(point: np.ndarray, poly: np.ndarray) -> float:
    """Euclidean distance from a point to a convex polygon (0 when inside)."""
    p = np.asarray(point, dtype=float)
    if point_in_polygon(p, poly):
        return 0.0
    nxt = np.roll(poly, -1, axis=0)
    seg = nxt - poly
    seg_len2 = np.maximum((seg ** 2).sum(axis=1), 1e-300)
    t = np.clip(((p - poly) * seg).sum(axis=1) / seg_len2, 0.0, 1.0)
    closest = poly + t[:, None] * seg
    return float(np.sqrt(((closest - p) ** 2).sum(axis=1)).min())


def polygon_contains_within(point: np.ndarray, poly: np.ndarray,
                            expansion: float) -> bool:
    """True iff point lies inside the polygon expanded by ``expansion`` on
    every side (Minkowski sum with a closed disk of that radius)."""
    return distance_to_polygon(point, poly) <= expansion
