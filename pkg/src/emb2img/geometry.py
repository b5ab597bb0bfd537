"""Convex hull, minimum-area enclosing rectangle, and rotation to horizontal.

The hull uses the monotone chain algorithm with strict cross-product tests,
so collinear edge points are dropped. The minimum rectangle exploits the
calipers fact that one side is flush with a hull edge: every edge direction
is a candidate and the smallest wins, ties broken by smaller angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInput


class BBox(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin


@dataclass(frozen=True)
class Hull:
    """Convex polygon vertices in counter-clockwise order, lexicographic start."""

    vertices: np.ndarray

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> bool:
        """Cross-product containment test; tol applies to unit-scale coords."""
        verts = self.vertices
        points = np.asarray(points, dtype=np.float64)
        scale = max(float(np.abs(verts).max()), 1.0)
        edges = np.roll(verts, -1, axis=0) - verts
        for v, e in zip(verts, edges):
            rel = points - v
            cross = e[0] * rel[:, 1] - e[1] * rel[:, 0]
            if cross.min() < -tol * scale * scale:
                return False
        return True


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle by center, edge angle in [0, pi/2), and side lengths."""

    center: tuple[float, float]
    angle: float
    width: float
    height: float

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = np.array([c, s])
        v = np.array([-s, c])
        half_u = 0.5 * self.width * u
        half_v = 0.5 * self.height * v
        center = np.asarray(self.center)
        return np.array([
            center - half_u - half_v,
            center + half_u - half_v,
            center + half_u + half_v,
            center - half_u + half_v,
        ])

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> bool:
        points = np.asarray(points, dtype=np.float64)
        c, s = math.cos(self.angle), math.sin(self.angle)
        rel = points - np.asarray(self.center)
        u = rel[:, 0] * c + rel[:, 1] * s
        v = -rel[:, 0] * s + rel[:, 1] * c
        scale = max(self.width, self.height, 1.0)
        pad = tol * scale
        return bool(
            (np.abs(u) <= 0.5 * self.width + pad).all()
            and (np.abs(v) <= 0.5 * self.height + pad).all()
        )


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: np.ndarray) -> Hull:
    """Monotone-chain convex hull of a 2D point set, counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if pts.shape[0] < 3:
        raise DegenerateInput(
            f"need at least 3 distinct points, got {pts.shape[0]}"
        )
    # np.unique sorts rows lexicographically, which is the order we need.

    def half_chain(ordered):
        chain = []
        for p in ordered:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half_chain(pts)
    upper = half_chain(pts[::-1])
    vertices = np.array(lower[:-1] + upper[:-1])
    if vertices.shape[0] < 3:
        raise DegenerateInput("all points are collinear")
    vertices.setflags(write=False)
    return Hull(vertices=vertices)


def min_area_rect(hull: Hull) -> OrientedRect:
    """Smallest-area enclosing rectangle; one side is flush with a hull edge."""
    verts = hull.vertices
    edges = np.roll(verts, -1, axis=0) - verts
    angles = np.arctan2(edges[:, 1], edges[:, 0]) % (0.5 * math.pi)

    best = None
    for theta in angles:
        c, s = math.cos(theta), math.sin(theta)
        u = verts[:, 0] * c + verts[:, 1] * s
        v = -verts[:, 0] * s + verts[:, 1] * c
        umin, umax = u.min(), u.max()
        vmin, vmax = v.min(), v.max()
        area = (umax - umin) * (vmax - vmin)
        if best is None or (area, theta) < (best[0], best[1]):
            best = (area, theta, umin, umax, vmin, vmax)

    _, theta, umin, umax, vmin, vmax = best
    c, s = math.cos(theta), math.sin(theta)
    cu, cv = 0.5 * (umin + umax), 0.5 * (vmin + vmax)
    center = (cu * c - cv * s, cu * s + cv * c)
    return OrientedRect(
        center=center, angle=float(theta),
        width=float(umax - umin), height=float(vmax - vmin),
    )


def rotate_to_horizontal(
    points: np.ndarray, rect: OrientedRect
) -> tuple[np.ndarray, BBox]:
    """Rotate points by -rect.angle about rect.center so the enclosing
    rectangle is axis-aligned; an extra 90 degrees makes width >= height."""
    points = np.asarray(points, dtype=np.float64)
    center = np.asarray(rect.center)

    def rotated(angle):
        c, s = math.cos(angle), math.sin(angle)
        rel = points - center
        return np.column_stack([
            rel[:, 0] * c - rel[:, 1] * s + center[0],
            rel[:, 0] * s + rel[:, 1] * c + center[1],
        ])

    out = rotated(-rect.angle)
    bbox = BBox(
        float(out[:, 0].min()), float(out[:, 1].min()),
        float(out[:, 0].max()), float(out[:, 1].max()),
    )
    if bbox.width < bbox.height:
        out = rotated(-rect.angle + 0.5 * math.pi)
        bbox = BBox(
            float(out[:, 0].min()), float(out[:, 1].min()),
            float(out[:, 0].max()), float(out[:, 1].max()),
        )
    return out, bbox
