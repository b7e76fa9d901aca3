"""Cell filling and rendering.

A cell is cropped when scaling the image so its salient box lands on the
fitted box already covers the whole cell; otherwise the annulus between the
salient box and the image frame is warped piecewise-affinely onto the
annulus between the fitted box and the cell's covering rectangle. Pixels
are painted by inverse mapping with bilinear sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DegenerateGeometry
from .geometry import ConvexPolygon, RectSpec, delaunay, half_plane_array, signed_area

CROP = "crop"
WARP = "warp"

# relative area floor below which an annulus triangle is considered collapsed
DEGENERATE_TRI_FRAC = 1e-9


@dataclass
class WarpPlan:
    mode: str  # CROP | WARP
    src_points: np.ndarray  # (8, 2): frame corners then salient-box corners
    dst_points: np.ndarray  # (8, 2): cover corners then fitted-box corners
    triangles: list  # annulus triangles as index triples (source == target)
    affines: list  # per-triangle 2x3, source -> target
    inverses: list  # per-triangle 2x3, target -> source
    box_affine: np.ndarray  # 2x3 similarity, salient box -> fitted box
    box_inverse: np.ndarray


@dataclass
class LayoutCell:
    polygon: ConvexPolygon
    image: object  # ImageRecord
    fitted: RectSpec  # T, inside the cell
    cover: RectSpec  # H, axis-aligned bounding rectangle of the cell
    plan: WarpPlan


def _affine_from_triples(src, dst) -> np.ndarray:
    """2x3 affine mapping three source points onto three target points."""
    s = np.asarray(src, dtype=float)
    d = np.asarray(dst, dtype=float)
    m = np.column_stack([s[1] - s[0], s[2] - s[0]])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-300:
        raise DegenerateGeometry("degenerate triangle in warp plan")
    minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    a = np.column_stack([d[1] - d[0], d[2] - d[0]]) @ minv
    t = d[0] - a @ s[0]
    return np.column_stack([a, t])


def _apply_affine(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    return points @ matrix[:, :2].T + matrix[:, 2]


def frame_rect(width: float, height: float) -> RectSpec:
    return RectSpec(width / 2.0, height / 2.0, float(width), float(height))


def cover_rect(cell: ConvexPolygon) -> RectSpec:
    x0, y0, x1, y1 = cell.bounds
    return RectSpec(0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0)


def _box_similarity(src: RectSpec, dst: RectSpec) -> np.ndarray:
    s = dst.height / src.height
    tx = dst.cx - s * src.cx
    ty = dst.cy - s * src.cy
    return np.array([[s, 0.0, tx], [0.0, s, ty]])


def choose_mode(image, salient_box: RectSpec, cell: ConvexPolygon, fitted: RectSpec) -> str:
    """Crop iff aligning the salient box with the fitted box makes the
    scaled image frame cover the whole cell."""
    sim = _box_similarity(salient_box, fitted)
    frame = frame_rect(image.width, image.height)
    scaled = _apply_affine(sim, frame.corners())
    x0, y0 = scaled.min(axis=0)
    x1, y1 = scaled.max(axis=0)
    tol = 1e-9 * cell.diagonal
    v = cell.vertices
    covered = (
        (v[:, 0] >= x0 - tol).all()
        and (v[:, 0] <= x1 + tol).all()
        and (v[:, 1] >= y0 - tol).all()
        and (v[:, 1] <= y1 + tol).all()
    )
    return CROP if covered else WARP


def build_warp_plan(image, salient_box: RectSpec, cell: ConvexPolygon, fitted: RectSpec) -> WarpPlan:
    """Triangulate the frame/salient-box annulus and pair it with the
    cover/fitted-box annulus by corner correspondence."""
    mode = choose_mode(image, salient_box, cell, fitted)
    frame = frame_rect(image.width, image.height)
    cover = cover_rect(cell)
    src = np.vstack([frame.corners(), salient_box.corners()])
    dst = np.vstack([cover.corners(), fitted.corners()])
    box_affine = _box_similarity(salient_box, fitted)
    box_inverse = _box_similarity(fitted, salient_box)
    triangles = []
    affines = []
    inverses = []
    if mode == WARP:
        min_area = DEGENERATE_TRI_FRAC * frame.area
        for tri in delaunay(src):
            pts = src[list(tri)]
            cx, cy = pts.mean(axis=0)
            inside_box = (
                abs(cx - salient_box.cx) < salient_box.width / 2
                and abs(cy - salient_box.cy) < salient_box.height / 2
            )
            if inside_box:
                continue
            if abs(signed_area(pts)) < min_area or abs(signed_area(dst[list(tri)])) < min_area:
                continue  # collapsed annulus region: box affine covers it
            triangles.append(tri)
            affines.append(_affine_from_triples(src[list(tri)], dst[list(tri)]))
            inverses.append(_affine_from_triples(dst[list(tri)], src[list(tri)]))
    return WarpPlan(
        mode=mode,
        src_points=src,
        dst_points=dst,
        triangles=triangles,
        affines=affines,
        inverses=inverses,
        box_affine=box_affine,
        box_inverse=box_inverse,
    )


def rasterize_convex(polygon: ConvexPolygon, width: int, height: int, tol: float = 0.0) -> np.ndarray:
    """Pixel-center test against the polygon's half-planes."""
    x0, y0, x1, y1 = polygon.bounds
    c0 = max(0, int(math.floor(x0 - 1)))
    c1 = min(width - 1, int(math.ceil(x1 + 1)))
    r0 = max(0, int(math.floor(y0 - 1)))
    r1 = min(height - 1, int(math.ceil(y1 + 1)))
    mask = np.zeros((height, width), dtype=bool)
    if c1 < c0 or r1 < r0:
        return mask
    xs = np.arange(c0, c1 + 1) + 0.5
    ys = np.arange(r0, r1 + 1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    planes = half_plane_array(polygon)
    depth = np.full(gx.shape, np.inf)
    for a, b, c in planes:
        depth = np.minimum(depth, c - a * gx - b * gy)
    mask[r0 : r1 + 1, c0 : c1 + 1] = depth >= -tol
    return mask


def assign_pixels(cells: list, shape_mask: np.ndarray) -> np.ndarray:
    """Partition shape pixels among cells by deepest-cell ownership: every
    shape pixel gets exactly one cell, so painted masks are disjoint and
    cover the shape completely."""
    h, w = shape_mask.shape
    owner = np.full((h, w), -1, dtype=np.int32)
    best = np.full((h, w), -np.inf)
    for idx, cell in enumerate(cells):
        x0, y0, x1, y1 = cell.polygon.bounds
        c0 = max(0, int(math.floor(x0 - 2)))
        c1 = min(w - 1, int(math.ceil(x1 + 2)))
        r0 = max(0, int(math.floor(y0 - 2)))
        r1 = min(h - 1, int(math.ceil(y1 + 2)))
        if c1 < c0 or r1 < r0:
            continue
        xs = np.arange(c0, c1 + 1) + 0.5
        ys = np.arange(r0, r1 + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        planes = half_plane_array(cell.polygon)
        depth = np.full(gx.shape, np.inf)
        for a, b, c in planes:
            depth = np.minimum(depth, c - a * gx - b * gy)
        window = (slice(r0, r1 + 1), slice(c0, c1 + 1))
        improve = (depth > best[window]) & shape_mask[window]
        best[window][improve] = depth[improve]
        owner[window][improve] = idx
    # pixels not reached by any bbox window: claim by nearest cell center
    orphans = shape_mask & (owner < 0)
    if orphans.any():
        centers = np.array([c.polygon.vertices.mean(axis=0) for c in cells])
        rr, cc = np.nonzero(orphans)
        pts = np.column_stack([cc + 0.5, rr + 0.5])
        d = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        owner[rr, cc] = np.argmin(d, axis=1)
    return owner


def load_image_rgb(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32)


def _bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (x, y) image coordinates; pixel (r, c) center at (c+.5, r+.5)."""
    h, w = img.shape[:2]
    fx = np.clip(xs - 0.5, 0.0, w - 1.0)
    fy = np.clip(ys - 0.5, 0.0, h - 1.0)
    x0 = np.floor(fx).astype(np.intp)
    y0 = np.floor(fy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = (fx - x0)[:, None]
    ay = (fy - y0)[:, None]
    top = img[y0, x0] * (1 - ax) + img[y0, x1] * ax
    bot = img[y1, x0] * (1 - ax) + img[y1, x1] * ax
    return top * (1 - ay) + bot * ay


def source_coords(plan: WarpPlan, xs: np.ndarray, ys: np.ndarray):
    """Inverse-map target pixel centers to source coordinates."""
    pts = np.column_stack([xs, ys])
    if plan.mode == CROP:
        return _apply_affine(plan.box_inverse, pts)
    out = np.full_like(pts, np.nan)
    # fitted-box interior follows the box similarity
    t = plan.dst_points[4:8]
    x0, y0 = t.min(axis=0)
    x1, y1 = t.max(axis=0)
    in_box = (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
    out[in_box] = _apply_affine(plan.box_inverse, pts[in_box])
    unresolved = ~in_box
    for tri, inv in zip(plan.triangles, plan.inverses):
        if not unresolved.any():
            break
        d0, d1, d2 = plan.dst_points[list(tri)]
        m = np.column_stack([d1 - d0, d2 - d0])
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-300:
            continue
        idx = np.flatnonzero(unresolved)
        rel = pts[idx] - d0
        l1 = (rel[:, 0] * m[1, 1] - rel[:, 1] * m[0, 1]) / det
        l2 = (-rel[:, 0] * m[1, 0] + rel[:, 1] * m[0, 0]) / det
        hit = (l1 >= -1e-9) & (l2 >= -1e-9) & (l1 + l2 <= 1 + 1e-9)
        sel = idx[hit]
        out[sel] = _apply_affine(inv, pts[sel])
        unresolved[sel] = False
    if unresolved.any():
        # degenerate-triangle gaps fall back to the box similarity
        out[unresolved] = _apply_affine(plan.box_inverse, pts[unresolved])
    return out


def apply_warp(image: np.ndarray, plan: WarpPlan, cell: ConvexPolygon, canvas: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Paint one cell; only pixels inside `mask` (default: the polygon's
    rasterization) are touched. Returns the painted mask."""
    h, w = canvas.shape[:2]
    if mask is None:
        mask = rasterize_convex(cell, w, h)
    rr, cc = np.nonzero(mask)
    if rr.size == 0:
        return mask
    xs = cc + 0.5
    ys = rr + 0.5
    src = source_coords(plan, xs, ys)
    colors = _bilinear(image, src[:, 0], src[:, 1])
    canvas[rr, cc] = colors
    return mask


def saliency_in_cell(plan: WarpPlan, image, mask: np.ndarray, saliency_mask: np.ndarray | None) -> np.ndarray:
    """Painted salient pixels of one cell: warped pixel mask when supplied,
    otherwise the fitted-box region (the salient box maps exactly onto it)."""
    out = np.zeros_like(mask)
    rr, cc = np.nonzero(mask)
    if rr.size == 0:
        return out
    xs = cc + 0.5
    ys = rr + 0.5
    if saliency_mask is not None:
        src = source_coords(plan, xs, ys)
        vals = _bilinear(saliency_mask.astype(np.float32)[:, :, None], src[:, 0], src[:, 1])
        out[rr, cc] = vals[:, 0] >= 0.5
    else:
        t = plan.dst_points[4:8]
        x0, y0 = t.min(axis=0)
        x1, y1 = t.max(axis=0)
        out[rr, cc] = (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
    return out


def render(cells: list, shape, canvas_size=None, background=(255, 255, 255), image_arrays=None, saliency_arrays=None):
    """Compose the collage; returns (uint8 canvas, per-cell painted masks,
    per-cell painted-saliency masks, ownership partition)."""
    if canvas_size is None:
        h, w = shape.mask.shape
    else:
        w, h = canvas_size
    canvas = np.empty((h, w, 3), dtype=np.float32)
    canvas[:] = np.asarray(background, dtype=np.float32)
    owner = assign_pixels(cells, shape.mask)
    painted = []
    salient = []
    for idx, cell in enumerate(cells):
        mask = owner == idx
        if image_arrays is not None:
            img = image_arrays[cell.image.id]
        else:
            img = load_image_rgb(cell.image.path)
        apply_warp(img, cell.plan, cell.polygon, canvas, mask=mask)
        smask = None
        if saliency_arrays is not None:
            smask = saliency_arrays.get(cell.image.id)
        salient.append(saliency_in_cell(cell.plan, cell.image, mask, smask))
        painted.append(mask)
    return np.clip(canvas + 0.5, 0, 255).astype(np.uint8), painted, salient, owner
