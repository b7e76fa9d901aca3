"""Shape ingestion: polygon-with-holes model, raster mask, boundary sampling.

Canvas convention: x grows right, y grows down (image order). Pixel (row r,
col c) covers [c, c+1] x [r, r+1] with its center at (c+0.5, r+0.5). Outer
rings carry positive shoelace area in this frame, holes negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from PIL import Image

from .errors import InvalidShape, PreconditionViolated
from .geometry import signed_area

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".gif", ".tif", ".tiff"}

# boundary sample spacing in raster cells (invariant allows up to 1.5)
BOUNDARY_SPACING = 0.75
# Douglas-Peucker tolerance for mask-traced contours, in raster cells
TRACE_SIMPLIFY_TOL = 1.0


@dataclass
class ShapeModel:
    """Input shape normalized to working-canvas coordinates."""

    rings: list  # np arrays; rings[0] outer (positive area), rest holes
    mask: np.ndarray  # bool (H, W)
    resolution: int
    scale: float  # canvas units per input unit
    offset: np.ndarray  # input-space origin mapped to canvas (0, 0)
    boundary_xy: np.ndarray  # (B, 2) samples in canvas units
    boundary_ring: np.ndarray  # (B,) ring index per sample
    boundary_arc: np.ndarray  # (B,) cumulative arc length per ring, canvas units
    ring_lengths: np.ndarray  # total perimeter per ring
    polygon: shapely.Polygon = field(repr=False)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def area_px(self) -> int:
        return int(self.mask.sum())

    def contains_points(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return shapely.contains_xy(self.polygon, p[:, 0], p[:, 1])


def parse_polygon_file(path) -> list:
    """One ring per line as `x,y` pairs; first ring outer, rest holes."""
    rings = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pts = []
        for token in line.split():
            x, y = token.split(",")
            pts.append((float(x), float(y)))
        rings.append(np.asarray(pts, dtype=float))
    if not rings:
        raise InvalidShape(f"no rings found in {path}")
    return rings


def write_polygon_file(rings, path) -> None:
    lines = []
    for ring in rings:
        lines.append(" ".join(f"{x:.6f},{y:.6f}" for x, y in np.asarray(ring)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mask(path, threshold: int = 128) -> np.ndarray:
    img = Image.open(path).convert("L")
    return np.asarray(img) >= threshold


def save_mask(mask: np.ndarray, path) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def rasterize_rings(rings, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill over pixel centers for any set of rings."""
    mask = np.zeros((height, width), dtype=bool)
    row_idx = []
    row_x = []
    for ring in rings:
        v = np.asarray(ring, dtype=float)
        w = np.roll(v, -1, axis=0)
        for (x1, y1), (x2, y2) in zip(v, w):
            if y1 == y2:
                continue
            ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
            r0 = max(0, math.ceil(ylo - 0.5))
            r1 = min(height - 1, math.ceil(yhi - 0.5) - 1)
            if r1 < r0:
                continue
            rows = np.arange(r0, r1 + 1)
            yc = rows + 0.5
            xs = x1 + (yc - y1) * (x2 - x1) / (y2 - y1)
            row_idx.append(rows)
            row_x.append(xs)
    if not row_idx:
        return mask
    rows = np.concatenate(row_idx)
    xs = np.concatenate(row_x)
    order = np.lexsort((xs, rows))
    rows, xs = rows[order], xs[order]
    starts = np.searchsorted(rows, np.arange(height), side="left")
    ends = np.searchsorted(rows, np.arange(height), side="right")
    for r in range(height):
        cx = xs[starts[r] : ends[r]]
        for k in range(0, len(cx) - 1, 2):
            c0 = max(0, math.ceil(cx[k] - 0.5))
            c1 = min(width - 1, math.ceil(cx[k + 1] - 0.5) - 1)
            if c1 >= c0:
                mask[r, c0 : c1 + 1] = True
    return mask


def _close_ring(ring: np.ndarray) -> np.ndarray:
    if np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    return ring


def _validate_rings(rings) -> list:
    cleaned = []
    for i, ring in enumerate(rings):
        r = _close_ring(np.asarray(ring, dtype=float))
        if r.shape[0] < 3:
            raise InvalidShape(f"ring {i} has fewer than 3 vertices")
        line = shapely.LinearRing(r)
        if not line.is_simple or not line.is_valid:
            raise InvalidShape(f"ring {i} is self-intersecting")
        cleaned.append(r)
    outer = cleaned[0]
    if signed_area(outer) < 0:
        outer = outer[::-1].copy()
    holes = []
    outer_poly = shapely.Polygon(outer)
    for i, hole in enumerate(cleaned[1:], start=1):
        if signed_area(hole) > 0:
            hole = hole[::-1].copy()
        if not outer_poly.contains(shapely.Polygon(hole[::-1])):
            raise InvalidShape(f"hole ring {i} is not strictly inside the outer ring")
        holes.append(hole)
    return [outer] + holes


def _resample_ring(ring: np.ndarray, spacing: float):
    """Resample edges at <= spacing, keeping every original vertex."""
    pts = []
    arcs = []
    acc = 0.0
    n = ring.shape[0]
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        seg = float(np.linalg.norm(b - a))
        k = max(1, math.ceil(seg / spacing))
        for t in range(k):
            frac = t / k
            pts.append(a + frac * (b - a))
            arcs.append(acc + frac * seg)
        acc += seg
    return np.asarray(pts), np.asarray(arcs), acc


def trace_mask(mask: np.ndarray, simplify_tol: float = TRACE_SIMPLIFY_TOL) -> list:
    """Extract polygon rings (largest connected component) from a boolean mask."""
    import skimage.measure

    if not mask.any():
        raise InvalidShape("mask has no foreground pixels")
    labels = skimage.measure.label(mask, connectivity=1)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    main = int(np.argmax(counts))
    if (counts > 0).sum() > 1:
        import warnings

        warnings.warn("mask has multiple components; keeping the largest", stacklevel=2)
    component = labels == main
    padded = np.pad(component.astype(float), 1)
    contours = skimage.measure.find_contours(padded, 0.5)
    rings = []
    for contour in contours:
        # (row, col) -> (x, y), undo padding
        xy = contour[:, ::-1] - 1.0
        xy = _close_ring(xy)
        if xy.shape[0] < 3:
            continue
        ring = shapely.LinearRing(xy)
        simplified = shapely.simplify(shapely.Polygon(ring), simplify_tol, preserve_topology=True)
        coords = np.asarray(simplified.exterior.coords)[:-1]
        if coords.shape[0] >= 3 and abs(signed_area(coords)) > simplify_tol**2:
            rings.append(coords)
    if not rings:
        raise InvalidShape("no usable contour found in mask")
    rings.sort(key=lambda r: -abs(signed_area(r)))
    outer = rings[0]
    outer_poly = shapely.Polygon(outer)
    holes = [r for r in rings[1:] if outer_poly.contains(shapely.Point(r.mean(axis=0)))]
    return [outer] + holes


def build_shape_model(source, resolution: int = 1024) -> ShapeModel:
    """Build the working-resolution model from a polygon file, mask file,
    ring list, or boolean mask array."""
    if not 128 <= resolution <= 4096:
        raise PreconditionViolated(f"resolution {resolution} outside [128, 4096]")
    rings = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.suffix.lower() in IMAGE_SUFFIXES:
            rings = trace_mask(load_mask(path))
        else:
            rings = parse_polygon_file(path)
    elif isinstance(source, np.ndarray) and source.ndim == 2 and source.dtype != object:
        rings = trace_mask(source.astype(bool))
    else:
        rings = [np.asarray(r, dtype=float) for r in source]
    rings = _validate_rings(rings)

    allpts = np.vstack(rings)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = hi - lo
    long_side = float(max(span))
    if long_side <= 0:
        raise InvalidShape("degenerate shape extent")
    scale = resolution / long_side
    width = max(2, round(span[0] * scale))
    height = max(2, round(span[1] * scale))
    norm_rings = [(r - lo) * scale for r in rings]

    mask = rasterize_rings(norm_rings, width, height)
    if not mask.any():
        raise InvalidShape("rasterized mask is empty")

    samples = []
    ring_ids = []
    arcs = []
    lengths = []
    for i, ring in enumerate(norm_rings):
        pts, arc, total = _resample_ring(ring, BOUNDARY_SPACING)
        samples.append(pts)
        ring_ids.append(np.full(pts.shape[0], i, dtype=np.intp))
        arcs.append(arc)
        lengths.append(total)

    outer = norm_rings[0]
    holes = [h for h in norm_rings[1:]]
    polygon = shapely.Polygon(outer, holes)
    shapely.prepare(polygon)

    return ShapeModel(
        rings=norm_rings,
        mask=mask,
        resolution=resolution,
        scale=scale,
        offset=lo,
        boundary_xy=np.vstack(samples),
        boundary_ring=np.concatenate(ring_ids),
        boundary_arc=np.concatenate(arcs),
        ring_lengths=np.asarray(lengths),
        polygon=polygon,
    )
