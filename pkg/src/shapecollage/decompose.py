"""Convex decomposition of the shape along medial-axis part-cuts.

Concave corners are read off the exterior axis end vertices; each corner
spawns candidate cuts toward the opposite-side projections of interior
medial points; candidates are filtered by protrusion strength and selected
greedily (most salient first) until every corner is resolved.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.spatial
import shapely
import shapely.ops

from .errors import NonConvexResidualWarning, CornerUnresolvableWarning
from .geometry import ConvexPolygon, signed_area
from .medial import MedialAxisGraph, nearest_medial
from .shape import ShapeModel

DEFAULT_TAU_P = 0.75
# corner end vertices must sit this close to the boundary (fraction of diag)
CORNER_RADIUS_FRAC = 0.02
# endpoint dedup / corner matching tolerance in raster cells
ENDPOINT_TOL = 2.0
# angle slack when testing whether a cut resolves a reflex corner (rad)
RESOLVE_EPS = 1e-6
# faces below this fraction of the shape area are merged into a neighbor
SLIVER_AREA_FRAC = 0.002


@dataclass
class ConcaveCorner:
    sample_index: int  # boundary sample at the reflex vertex
    point: np.ndarray
    exterior_end_vertex: np.ndarray
    opening: float  # interior angle (rad), > pi
    ring: int
    wedge_start: float  # direction angle of the outgoing boundary edge


@dataclass
class CandidateCut:
    start: int  # boundary sample index (at a concave corner)
    end: int  # boundary sample index
    start_xy: np.ndarray
    end_xy: np.ndarray
    protrusion: float
    arc_length: float

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end_xy - self.start_xy))


@dataclass
class Patch:
    id: int
    polygon: ConvexPolygon
    area_share: float
    prominence: float = 0.0
    convex: bool = True
    neighbors: dict = field(default_factory=dict)  # patch id -> shared length


def _ring_vertex_angles(ring: np.ndarray):
    """Per-vertex (interior angle, outgoing-edge direction angle)."""
    prev = np.roll(ring, 1, axis=0)
    nxt = np.roll(ring, -1, axis=0)
    vin = ring - prev
    vout = nxt - ring
    ang_in = np.arctan2(vin[:, 1], vin[:, 0])
    ang_out = np.arctan2(vout[:, 1], vout[:, 0])
    turn = np.arctan2(np.sin(ang_out - ang_in), np.cos(ang_out - ang_in))
    interior = math.pi - turn
    return interior, ang_out


def find_concave_corners(shape: ShapeModel, exterior_axis: MedialAxisGraph) -> list:
    """One corner per exterior end vertex that touches a reflex vertex."""
    if exterior_axis.n_nodes == 0:
        return []
    reflex_pts = []
    reflex_meta = []  # (ring, opening, wedge_start)
    for ring_id, ring in enumerate(shape.rings):
        interior, ang_out = _ring_vertex_angles(ring)
        for k in np.flatnonzero(interior > math.pi + RESOLVE_EPS):
            reflex_pts.append(ring[k])
            reflex_meta.append((ring_id, float(interior[k]), float(ang_out[k])))
    if not reflex_pts:
        return []
    reflex_pts = np.asarray(reflex_pts)
    sample_tree = scipy.spatial.cKDTree(shape.boundary_xy)
    radius_max = CORNER_RADIUS_FRAC * shape.diagonal
    corners = {}
    for end in exterior_axis.end_vertices:
        if exterior_axis.radii[end] > radius_max:
            continue
        ev = exterior_axis.points[end]
        d = np.linalg.norm(reflex_pts - ev, axis=1)
        best = int(np.argmin(d))
        if d[best] > max(4.0, 2.0 * exterior_axis.radii[end]):
            continue
        corner_pt = reflex_pts[best]
        dist, sidx = sample_tree.query(corner_pt)
        if dist > 1e-6:
            continue
        ring_id, opening, wedge = reflex_meta[best]
        prev = corners.get(int(sidx))
        if prev is None or exterior_axis.radii[end] < prev[0]:
            corners[int(sidx)] = (
                float(exterior_axis.radii[end]),
                ConcaveCorner(
                    sample_index=int(sidx),
                    point=np.asarray(corner_pt, dtype=float),
                    exterior_end_vertex=np.asarray(ev, dtype=float),
                    opening=opening,
                    ring=ring_id,
                    wedge_start=wedge,
                ),
            )
    out = [v[1] for v in corners.values()]
    out.sort(key=lambda c: (c.ring, c.sample_index))
    return out


def _arc_distance(shape: ShapeModel, i: int, j: int) -> float:
    if shape.boundary_ring[i] != shape.boundary_ring[j]:
        return math.inf
    total = shape.ring_lengths[shape.boundary_ring[i]]
    d = abs(shape.boundary_arc[i] - shape.boundary_arc[j])
    return float(min(d, total - d))


def _bfs_order(graph: MedialAxisGraph, start: int):
    adj = [[] for _ in range(graph.n_nodes)]
    for i, j in graph.edges:
        adj[i].append(int(j))
        adj[j].append(int(i))
    seen = np.zeros(graph.n_nodes, dtype=bool)
    order = [start]
    seen[start] = True
    head = 0
    while head < len(order):
        cur = order[head]
        head += 1
        for nb in sorted(adj[cur]):
            if not seen[nb]:
                seen[nb] = True
                order.append(nb)
    return order


def generate_raw_cuts(shape: ShapeModel, interior_axis: MedialAxisGraph, corners: list) -> list:
    """Walk the interior axis from each corner; cut to the opposite-side
    projection of every visited medial point."""
    cuts = []
    seen_keys = set()
    corner_pts = np.asarray([c.point for c in corners])
    corner_samples = [c.sample_index for c in corners]
    for corner in corners:
        start_node = nearest_medial(shape, interior_axis, corner.point)
        candidates = []
        for node in _bfs_order(interior_axis, start_node):
            proj = interior_axis.projections[node]
            if len(proj) < 2:
                continue
            best = max(proj, key=lambda p: (_arc_distance(shape, corner.sample_index, p), -p))
            # snap endpoints landing next to another corner onto it, so
            # faces close exactly there instead of leaving a sliver
            snap = np.linalg.norm(corner_pts - shape.boundary_xy[best], axis=1)
            hit = int(np.argmin(snap))
            if snap[hit] <= ENDPOINT_TOL:
                best = corner_samples[hit]
            if best == corner.sample_index:
                continue
            key = (
                corner.sample_index,
                round(shape.boundary_xy[best][0] / ENDPOINT_TOL),
                round(shape.boundary_xy[best][1] / ENDPOINT_TOL),
            )
            if key in seen_keys:
                continue
            seen_keys.add(key)
            candidates.append(best)
        if not candidates:
            warnings.warn(
                f"no cut candidates for corner at {corner.point}", CornerUnresolvableWarning
            )
            continue
        kept = _filter_inside(shape, corner, candidates)
        if not kept:
            warnings.warn(
                f"no valid cut for corner at {corner.point}", CornerUnresolvableWarning
            )
        for end in kept:
            arc = _arc_distance(shape, corner.sample_index, end)
            length = float(np.linalg.norm(shape.boundary_xy[end] - corner.point))
            protrusion = 0.0 if math.isinf(arc) else length / arc
            cuts.append(
                CandidateCut(
                    start=corner.sample_index,
                    end=int(end),
                    start_xy=corner.point,
                    end_xy=shape.boundary_xy[end].copy(),
                    protrusion=protrusion,
                    arc_length=arc,
                )
            )
    return cuts


def _filter_inside(shape: ShapeModel, corner, candidates: list) -> list:
    """Keep cut ends whose open segment from the corner stays inside."""
    seg_pts = []
    seg_slices = []
    for end in candidates:
        a = corner.point
        b = shape.boundary_xy[end]
        length = np.linalg.norm(b - a)
        n = int(length)
        if n < 4:
            seg_slices.append(None)
            continue
        t = np.linspace(0, 1, n)[2:-2]
        if t.size == 0:
            seg_slices.append(None)
            continue
        pts = a + t[:, None] * (b - a)
        seg_slices.append((len(seg_pts), len(seg_pts) + pts.shape[0]))
        seg_pts.append(pts)
        seg_pts[-1] = pts
    if seg_pts:
        allpts = np.vstack(seg_pts)
        inside = shape.contains_points(allpts)
    kept = []
    cursor = 0
    for end, slc in zip(candidates, seg_slices):
        if slc is None:
            continue
        lo, hi = slc
        if inside[lo:hi].all():
            kept.append(end)
    return kept


def filter_by_protrusion(cuts: list, tau_p: float = DEFAULT_TAU_P) -> list:
    return [c for c in cuts if c.protrusion <= tau_p]


def _wrap_positive(angle: float) -> float:
    while angle < 0:
        angle += 2 * math.pi
    while angle >= 2 * math.pi:
        angle -= 2 * math.pi
    return angle


def _resolves_corner(cut: CandidateCut, corner: ConcaveCorner) -> bool:
    """Does this cut split the corner's reflex angle into two parts <= pi?"""
    for endpoint, other in ((cut.start_xy, cut.end_xy), (cut.end_xy, cut.start_xy)):
        if np.linalg.norm(endpoint - corner.point) > ENDPOINT_TOL:
            continue
        d = other - corner.point
        alpha = _wrap_positive(math.atan2(d[1], d[0]) - corner.wedge_start)
        if alpha > corner.opening:
            continue
        if alpha <= math.pi + RESOLVE_EPS and corner.opening - alpha <= math.pi + RESOLVE_EPS:
            return True
    return False


def _segments_cross(a1, a2, b1, b2, tol: float = 1e-9) -> bool:
    """Proper intersection test; touching at shared endpoints is allowed."""
    for p, q in ((a1, b1), (a1, b2), (a2, b1), (a2, b2)):
        if np.linalg.norm(p - q) <= ENDPOINT_TOL:
            return False

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(a1, a2, b1)
    d2 = orient(a1, a2, b2)
    d3 = orient(b1, b2, a1)
    d4 = orient(b1, b2, a2)
    return (d1 * d2 < -tol) and (d3 * d4 < -tol)


def select_cuts_greedy(shape: ShapeModel, cuts: list, corners: list) -> list:
    """Ascending-protrusion greedy selection until all corners resolve."""
    order = sorted(cuts, key=lambda c: (c.protrusion, c.length, c.start, c.end))
    unresolved = {c.sample_index: c for c in corners}
    accepted = []
    for cut in order:
        if not unresolved:
            break
        resolves = [k for k, corner in unresolved.items() if _resolves_corner(cut, corner)]
        if not resolves:
            continue
        if any(
            _segments_cross(cut.start_xy, cut.end_xy, acc.start_xy, acc.end_xy)
            for acc in accepted
        ):
            continue
        accepted.append(cut)
        for k in resolves:
            del unresolved[k]
    if unresolved:
        warnings.warn(
            f"{len(unresolved)} concave corner(s) left unresolved; patches will be force-split",
            NonConvexResidualWarning,
        )
    return accepted


def _ring_lines(shape: ShapeModel):
    lines = []
    for ring_id in range(len(shape.rings)):
        sel = shape.boundary_ring == ring_id
        pts = shape.boundary_xy[sel]
        closed = np.vstack([pts, pts[:1]])
        lines.append(shapely.LineString(closed))
    return lines


def _faces_from_cuts(shape: ShapeModel, cuts: list) -> list:
    lines = _ring_lines(shape)
    for cut in cuts:
        lines.append(shapely.LineString([cut.start_xy, cut.end_xy]))
    merged = shapely.ops.unary_union(lines)
    faces = []
    for face in shapely.ops.polygonize(merged):
        rep = face.representative_point()
        if shape.contains_points([[rep.x, rep.y]])[0]:
            faces.append(face)
    return faces


def _face_vertices(face: shapely.Polygon, diag: float) -> np.ndarray:
    cleaned = shapely.simplify(face, 1e-6 * diag, preserve_topology=True)
    coords = np.asarray(cleaned.exterior.coords)[:-1]
    return coords


def _reflex_vertices(coords: np.ndarray):
    interior, ang_out = _ring_vertex_angles(coords)
    if signed_area(coords) < 0:
        interior = 2 * math.pi - interior
    return interior, ang_out


def _force_split(face: shapely.Polygon, diag: float, depth: int = 0) -> list:
    """Split non-convex faces along the worst reflex vertex's bisector;
    faces that still carry a hole are first split through the hole."""
    if face.interiors:
        if depth > 24:
            return [face]
        largest = max(face.interiors, key=lambda r: abs(shapely.Polygon(r).area))
        c = shapely.Polygon(largest).centroid
        span = 4.0 * diag
        for dx, dy in ((1.0, 0.0), (0.0, 1.0)):
            line = shapely.LineString(
                [(c.x - span * dx, c.y - span * dy), (c.x + span * dx, c.y + span * dy)]
            )
            try:
                pieces = shapely.ops.split(face, line)
            except Exception:
                continue
            geoms = [g for g in pieces.geoms if isinstance(g, shapely.Polygon) and g.area > 0]
            if len(geoms) >= 2:
                out = []
                for g in geoms:
                    out.extend(_force_split(g, diag, depth + 1))
                return out
        return [face]
    coords = _face_vertices(face, diag)
    if coords.shape[0] < 3:
        return []
    if signed_area(coords) < 0:
        coords = coords[::-1].copy()
    interior, ang_out = _ring_vertex_angles(coords)
    worst = int(np.argmax(interior))
    if interior[worst] <= math.pi + 2e-6 or depth > 16:
        return [face]
    p = coords[worst]
    bisector = ang_out[worst] + 0.5 * interior[worst]
    d = np.array([math.cos(bisector), math.sin(bisector)])
    span = 4.0 * diag
    line = shapely.LineString([p - span * d, p + span * d])
    try:
        pieces = shapely.ops.split(face, line)
    except Exception:
        return [face]
    geoms = [g for g in pieces.geoms if isinstance(g, shapely.Polygon) and g.area > diag * 1e-9]
    if len(geoms) < 2:
        return [face]
    out = []
    for g in geoms:
        out.extend(_force_split(g, diag, depth + 1))
    return out


def _merge_face_into(faces: list, idx: int, target: int) -> None:
    faces[target] = shapely.ops.unary_union([faces[target], faces[idx]])
    faces.pop(idx)


def _shared_length(a: shapely.Polygon, b: shapely.Polygon) -> float:
    inter = a.boundary.intersection(b.boundary)
    return float(inter.length)


def decompose(
    shape: ShapeModel,
    tau_p: float = DEFAULT_TAU_P,
    interior_axis: MedialAxisGraph | None = None,
    exterior_axis: MedialAxisGraph | None = None,
) -> list:
    """Full MAD pipeline: corners -> raw cuts -> filter -> greedy -> patches."""
    from .medial import medial_axis

    if interior_axis is None:
        interior_axis = medial_axis(shape, "interior")
    if exterior_axis is None:
        exterior_axis = medial_axis(shape, "exterior")
    corners = find_concave_corners(shape, exterior_axis)
    accepted = []
    if corners:
        raw = generate_raw_cuts(shape, interior_axis, corners)
        kept = filter_by_protrusion(raw, tau_p)
        accepted = select_cuts_greedy(shape, kept, corners)
    faces = _faces_from_cuts(shape, accepted)
    faces = _absorb_slivers(faces)

    convex_faces = []
    for face in faces:
        convex_faces.extend(_force_split(face, shape.diagonal))

    patches = _faces_to_patches(convex_faces, shape)
    return patches


def _absorb_slivers(faces: list) -> list:
    """Merge numerical micro-faces into their longest-shared neighbor."""
    faces = sorted(faces, key=lambda f: (round(f.bounds[0], 6), round(f.bounds[1], 6), -f.area))
    total_area = sum(f.area for f in faces)
    min_area = SLIVER_AREA_FRAC * total_area
    changed = True
    while changed and len(faces) > 1:
        changed = False
        for i, face in enumerate(faces):
            if face.area >= min_area:
                continue
            shared = [
                (_shared_length(face, other), j) for j, other in enumerate(faces) if j != i
            ]
            shared.sort(key=lambda t: (-t[0], t[1]))
            if shared and shared[0][0] > 0:
                _merge_face_into(faces, i, shared[0][1])
                changed = True
                break
    return faces


def _faces_to_patches(faces: list, shape: ShapeModel) -> list:
    shape_area = shape.polygon.area
    records = []
    for face in faces:
        coords = _face_vertices(face, shape.diagonal)
        if coords.shape[0] < 3:
            continue
        records.append((coords, face))
    records.sort(
        key=lambda t: (round(t[0][:, 0].min(), 6), round(t[0][:, 1].min(), 6), -t[1].area)
    )
    patches = []
    for pid, (coords, face) in enumerate(records):
        convex = True
        try:
            poly = ConvexPolygon(coords)
        except Exception:
            poly = ConvexPolygon(coords, validate=False)
            convex = False
        patches.append(
            Patch(
                id=pid,
                polygon=poly,
                area_share=face.area / shape_area,
                convex=convex,
            )
        )
    for a in patches:
        fa = shapely.Polygon(a.polygon.vertices)
        for b in patches:
            if b.id <= a.id:
                continue
            fb = shapely.Polygon(b.polygon.vertices)
            shared = _shared_length(fa, fb)
            if shared > 0:
                a.neighbors[b.id] = shared
                b.neighbors[a.id] = shared
    return patches


def merge_small_patches(patches: list, n_images: int) -> list:
    """Merge smallest patches into cut-sharing neighbors until the patch
    count fits the image count."""
    target = max(1, n_images)
    if len(patches) <= target:
        return patches
    work = {
        p.id: shapely.Polygon(p.polygon.vertices) for p in patches
    }
    shares = {p.id: p.area_share for p in patches}
    while len(work) > target:
        smallest = min(work, key=lambda pid: (work[pid].area, pid))
        partners = [
            (pid, _shared_length(work[smallest], poly))
            for pid, poly in work.items()
            if pid != smallest
        ]
        partners = [(pid, sl) for pid, sl in partners if sl > 0]
        if not partners:
            break  # disconnected component; nothing adjacent to merge into
        partners.sort(key=lambda t: (-t[1], t[0]))
        target_id = partners[0][0]
        work[target_id] = shapely.ops.unary_union([work[target_id], work[smallest]])
        shares[target_id] += shares[smallest]
        del work[smallest]
        del shares[smallest]
    out = []
    for new_id, pid in enumerate(sorted(work)):
        poly = work[pid]
        coords = np.asarray(
            shapely.simplify(poly, 1e-9, preserve_topology=True).exterior.coords
        )[:-1]
        convex = True
        try:
            cp = ConvexPolygon(coords)
        except Exception:
            cp = ConvexPolygon(coords, validate=False)
            convex = False
            warnings.warn(
                f"merged patch {pid} is not convex", NonConvexResidualWarning
            )
        out.append(Patch(id=new_id, polygon=cp, area_share=shares[pid], convex=convex))
    return out
