"""Convex 2D primitives: polygons, half-planes, centroid splits, Delaunay
triangulation, and the aspect-constrained maximum inscribed rectangle.

All values are immutable after construction; every operation is a pure
function, so results are safe to share across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.spatial

from .errors import DegenerateGeometry, InvalidSplit

# Angle slack (rad) for convexity checks and collinear-vertex collapse.
CONVEX_EPS = 1e-6
# Relative tolerance for area comparisons.
AREA_EPS = 1e-6
# Coincidence tolerance, relative to the geometry's own bbox diagonal.
GEOM_EPS = 1e-9


class HalfPlane(NamedTuple):
    """Linear constraint a*x + b*y <= c with unit (a, b)."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class RectSpec:
    """Axis-aligned rectangle given by center and side lengths."""

    cx: float
    cy: float
    width: float
    height: float

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def aspect(self) -> float:
        return self.width / self.height

    def corners(self) -> np.ndarray:
        """4x2 corner array, CCW starting at (min x, min y)."""
        hw, hh = 0.5 * self.width, 0.5 * self.height
        return np.array(
            [
                [self.cx - hw, self.cy - hh],
                [self.cx + hw, self.cy - hh],
                [self.cx + hw, self.cy + hh],
                [self.cx - hw, self.cy + hh],
            ]
        )


def signed_area(vertices) -> float:
    """Shoelace signed area of a vertex ring (positive when CCW)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _dedup_ring(v: np.ndarray, tol: float) -> np.ndarray:
    keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > tol
    if not keep.all():
        v = v[keep]
    return v


class ConvexPolygon:
    """Convex polygon stored as an (n, 2) float array of CCW vertices."""

    __slots__ = ("vertices",)

    def __init__(self, vertices, validate: bool = True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise DegenerateGeometry("polygon needs at least 3 points")
        if not np.isfinite(v).all():
            raise DegenerateGeometry("non-finite vertex coordinates")
        span = v.max(axis=0) - v.min(axis=0)
        diag = float(np.hypot(*span))
        if diag <= 0.0:
            raise DegenerateGeometry("all vertices coincide")
        v = _dedup_ring(v, GEOM_EPS * diag)
        if v.shape[0] < 3:
            raise DegenerateGeometry("polygon collapsed after dedup")
        area = signed_area(v)
        if area < 0:
            v = v[::-1].copy()
            area = -area
        if area <= (GEOM_EPS * diag) * diag:
            raise DegenerateGeometry("polygon area is (near) zero")
        if validate:
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            lens = np.linalg.norm(e, axis=1)
            slack = CONVEX_EPS * lens * np.roll(lens, -1)
            if np.any(cross < -slack):
                raise DegenerateGeometry("polygon is not convex")
        v.setflags(write=False)
        self.vertices = v

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def __repr__(self) -> str:
        return f"ConvexPolygon({self.vertices.shape[0]} vertices, area={self.area:.6g})"

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bounds
        return math.hypot(x1 - x0, y1 - y0)

    def key(self) -> bytes:
        """Canonical hashable identity (exact float bytes)."""
        return self.vertices.tobytes()

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Vectorized point-in-polygon test (boundary counts as inside)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        planes = half_plane_array(self)
        vals = p @ planes[:, :2].T - planes[:, 2]
        return (vals <= tol).all(axis=1)


def centroid(poly: ConvexPolygon) -> np.ndarray:
    """Area-weighted centroid; interior for any valid convex polygon."""
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    area6 = 3.0 * np.sum(cross)
    if abs(area6) <= 0.0:
        raise DegenerateGeometry("zero-area polygon has no centroid")
    cx = np.sum((v[:, 0] + w[:, 0]) * cross) / area6
    cy = np.sum((v[:, 1] + w[:, 1]) * cross) / area6
    return np.array([cx, cy])


def split_by_line(poly: ConvexPolygon, point, direction) -> tuple[ConvexPolygon, ConvexPolygon]:
    """Cut a convex polygon by the line through `point` along `direction`.

    Returns the two convex halves, ordered so the first lies on the left of
    the oriented line. `point` must be strictly interior.
    """
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    nd = np.linalg.norm(d)
    if nd <= 0:
        raise InvalidSplit("zero split direction")
    d = d / nd
    eps = GEOM_EPS * max(poly.diagonal, 1e-300)
    planes = half_plane_array(poly)
    margins = planes[:, 2] - planes[:, :2] @ p
    if np.min(margins) <= eps:
        raise InvalidSplit("split point is not strictly interior")
    normal = np.array([-d[1], d[0]])
    offsets = poly.vertices @ normal - float(p @ normal)
    left = _clip_side(poly.vertices, offsets, eps)
    right = _clip_side(poly.vertices, -offsets, eps)
    try:
        return ConvexPolygon(left, validate=False), ConvexPolygon(right, validate=False)
    except DegenerateGeometry as exc:  # pragma: no cover - interior point rules this out
        raise InvalidSplit(f"split produced a degenerate piece: {exc}") from exc


def _clip_side(v: np.ndarray, s: np.ndarray, eps: float) -> np.ndarray:
    out = []
    n = v.shape[0]
    for i in range(n):
        j = (i + 1) % n
        si, sj = s[i], s[j]
        if si >= -eps:
            out.append(v[i])
        if (si > eps and sj < -eps) or (si < -eps and sj > eps):
            t = si / (si - sj)
            out.append(v[i] + t * (v[j] - v[i]))
    return np.asarray(out)


def half_plane_array(poly: ConvexPolygon) -> np.ndarray:
    """(E, 3) rows [a, b, c] with unit (a, b); inside = all a*x+b*y <= c."""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    # outward normal of a CCW edge is the edge direction rotated -90 deg
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
    lens = np.linalg.norm(normals, axis=1)
    normals = normals / lens[:, None]
    c = np.einsum("ij,ij->i", normals, v)
    return np.column_stack([normals, c])


def to_half_planes(poly: ConvexPolygon) -> list[HalfPlane]:
    """One half-plane per edge; a point is inside iff it satisfies all."""
    return [HalfPlane(float(a), float(b), float(c)) for a, b, c in half_plane_array(poly)]


_COMBO_CACHE: dict[int, np.ndarray] = {}


def _triples(m: int) -> np.ndarray:
    combos = _COMBO_CACHE.get(m)
    if combos is None:
        combos = np.array(list(itertools.combinations(range(m), 3)), dtype=np.intp)
        _COMBO_CACHE[m] = combos
    return combos


def max_inscribed_rect(poly: ConvexPolygon, aspect: float) -> RectSpec:
    """Largest axis-aligned rectangle of the given aspect inside `poly`.

    Solves the 3-variable LP max s over (cx, cy, s) with corner constraints
    folded per edge into a*cx + b*cy + (|a|w/2 + |b|h/2)*s <= c, by exact
    vertex enumeration over constraint triples.
    """
    if not (aspect > 0 and math.isfinite(aspect)):
        raise DegenerateGeometry(f"invalid aspect {aspect!r}")
    planes = half_plane_array(poly)
    w2, h2 = 0.5 * aspect, 0.5
    radius = np.abs(planes[:, 0]) * w2 + np.abs(planes[:, 1]) * h2
    # rows: a*cx + b*cy + r*s <= c, plus -s <= 0
    rows = np.column_stack([planes[:, :2], radius, planes[:, 2]])
    rows = np.vstack([rows, [0.0, 0.0, -1.0, 0.0]])
    a = rows[:, :3]
    rhs = rows[:, 3]
    combos = _triples(rows.shape[0])
    m0, m1, m2 = a[combos[:, 0]], a[combos[:, 1]], a[combos[:, 2]]
    b0, b1, b2 = rhs[combos[:, 0]], rhs[combos[:, 1]], rhs[combos[:, 2]]

    c12 = np.cross(m1, m2)
    det = np.einsum("ij,ij->i", m0, c12)
    scale = poly.diagonal
    ok = np.abs(det) > 1e-12
    if not ok.any():
        raise DegenerateGeometry("inscribed-rectangle LP has no basic solutions")
    # Cramer's rule, batched
    c20 = np.cross(m2[ok], m0[ok])
    c01 = np.cross(m0[ok], m1[ok])
    dval = det[ok][:, None]
    sol = (b0[ok, None] * c12[ok] + b1[ok, None] * c20 + b2[ok, None] * c01) / dval
    feas_tol = 1e-9 * (scale + np.abs(rhs).max() + 1.0)
    feasible = (sol @ a.T - rhs[None, :] <= feas_tol).all(axis=1)
    if not feasible.any():
        raise DegenerateGeometry("inscribed-rectangle LP is infeasible")
    cand = sol[feasible]
    order = np.lexsort((cand[:, 1], cand[:, 0], -cand[:, 2]))
    cx, cy, s = cand[order[0]]
    if s <= 0:
        raise DegenerateGeometry("polygon admits no inscribed rectangle")
    return RectSpec(float(cx), float(cy), float(s * aspect), float(s))


def delaunay(points) -> list[tuple[int, int, int]]:
    """Delaunay triangulation of a point set, as CCW index triples."""
    p = np.asarray(points, dtype=float)
    if p.shape[0] < 3:
        raise DegenerateGeometry("need at least 3 points to triangulate")
    try:
        tri = scipy.spatial.Delaunay(p)
    except scipy.spatial.QhullError as exc:
        raise DegenerateGeometry(f"triangulation failed: {exc}") from exc
    out = []
    for simplex in tri.simplices:
        i, j, k = (int(x) for x in simplex)
        if signed_area(p[[i, j, k]]) < 0:
            j, k = k, j
        out.append((i, j, k))
    out.sort()
    return out


def effective_vertices(vertices, convex_eps: float = CONVEX_EPS) -> np.ndarray:
    """Collapse coincident and collinear-within-tolerance vertices."""
    v = np.asarray(vertices, dtype=float)
    span = v.max(axis=0) - v.min(axis=0)
    tol = GEOM_EPS * float(np.hypot(*span))
    v = _dedup_ring(v, tol)
    changed = True
    while changed and v.shape[0] > 3:
        changed = False
        keep = np.ones(v.shape[0], dtype=bool)
        n = v.shape[0]
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            e1, e2 = b - a, c - b
            l1, l2 = np.linalg.norm(e1), np.linalg.norm(e2)
            if l1 <= tol or l2 <= tol:
                keep[i] = False
                changed = True
                break
            cross = float(e1[0] * e2[1] - e1[1] * e2[0])
            turn = abs(math.atan2(cross, float(np.dot(e1, e2))))
            if turn <= convex_eps:
                keep[i] = False
                changed = True
                break
        v = v[keep]
    return v


def is_triangle(poly: ConvexPolygon) -> bool:
    """True iff exactly 3 vertices remain after degenerate-vertex collapse."""
    return effective_vertices(poly.vertices).shape[0] == 3
