"""Discrete medial axes from the Voronoi diagram of boundary samples.

The interior (exterior) axis keeps Voronoi edges whose generating samples
are non-adjacent along the boundary and whose geometry lies inside the shape
(inside the padded complement). Each kept vertex knows its radius and the
boundary samples it projects to; chains of degree-2 vertices form polylines.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import scipy.spatial
import shapely

from .errors import DegenerateGeometry, ThinRegionWarning
from .shape import ShapeModel

# ring-index separation below which two samples count as adjacent
ADJACENT_SAMPLES = 2
# spur pruning: end-vertex radius threshold, fraction of canvas diagonal
PRUNE_RADIUS_FRAC = 0.01
# spurs whose end projections open wider than this are genuine corners (rad)
CORNER_GAP_RAD = math.radians(30.0)
# exterior complement is clipped to bbox padded by this fraction of diagonal
EXTERIOR_PAD_FRAC = 0.25
# default clustering tolerance for projection queries, raster cells
PROJECTION_TOL = 2.0
# neighborhood radius for the principal-direction tangent fallback
FALLBACK_RADIUS_FRAC = 0.05


@dataclass
class MedialAxisGraph:
    """Finite linear graph of medial points with radii and projections."""

    kind: str  # "interior" | "exterior"
    points: np.ndarray  # (N, 2) canvas coordinates
    radii: np.ndarray  # (N,) distance to the boundary
    edges: np.ndarray  # (E, 2) node index pairs
    edge_generators: np.ndarray  # (E, 2) boundary sample indices per edge
    projections: list  # per node: sorted boundary sample indices (>= 2)
    chains: list  # each chain: dict(nodes=[...], closed=bool)
    node_chain: np.ndarray  # (N,) primary chain id (-1 if none)
    node_chain_pos: np.ndarray  # (N,) position within the primary chain
    degrees: np.ndarray  # (N,)
    _kdtree: object = field(default=None, repr=False)
    _dist_matrix: object = field(default=None, repr=False)

    @property
    def end_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.degrees == 1)

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    def kdtree(self):
        if self._kdtree is None:
            self._kdtree = scipy.spatial.cKDTree(self.points)
        return self._kdtree

    def _graph_matrix(self):
        if self._dist_matrix is None:
            n = self.n_nodes
            if self.edges.size:
                lengths = np.linalg.norm(
                    self.points[self.edges[:, 0]] - self.points[self.edges[:, 1]], axis=1
                )
                m = scipy.sparse.coo_matrix(
                    (lengths, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
                )
                self._dist_matrix = (m + m.T).tocsr()
            else:
                self._dist_matrix = scipy.sparse.csr_matrix((n, n))
        return self._dist_matrix

    def geodesics_from(self, node: int) -> np.ndarray:
        return scipy.sparse.csgraph.dijkstra(self._graph_matrix(), indices=node)


def distance_map(shape: ShapeModel) -> np.ndarray:
    """Per-cell Euclidean distance to the nearest boundary sample."""
    tree = scipy.spatial.cKDTree(shape.boundary_xy)
    h, w = shape.mask.shape
    cols, rows = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    centers = np.column_stack([cols.ravel(), rows.ravel()])
    dist, _ = tree.query(centers)
    dist = dist.reshape(h, w)
    # cells holding a boundary sample are boundary cells
    bc = np.clip(shape.boundary_xy.astype(int), 0, [w - 1, h - 1])
    dist[bc[:, 1], bc[:, 0]] = 0.0
    return dist


def projections(shape: ShapeModel, z, tol: float = PROJECTION_TOL) -> list:
    """Boundary sample indices at (near) minimal distance from z, one
    representative per contiguous boundary cluster."""
    tree = scipy.spatial.cKDTree(shape.boundary_xy)
    z = np.asarray(z, dtype=float)
    dmin, _ = tree.query(z)
    idx = np.asarray(sorted(tree.query_ball_point(z, dmin + tol)), dtype=np.intp)
    if idx.size == 0:
        return []
    reps = []
    cluster = [idx[0]]
    for prev, cur in zip(idx[:-1], idx[1:]):
        same_ring = shape.boundary_ring[prev] == shape.boundary_ring[cur]
        if same_ring and cur - prev <= ADJACENT_SAMPLES:
            cluster.append(cur)
        else:
            reps.append(cluster)
            cluster = [cur]
    reps.append(cluster)
    # merge wrap-around clusters on the same ring
    if len(reps) > 1:
        first, last = reps[0], reps[-1]
        ring = shape.boundary_ring
        if ring[first[0]] == ring[last[-1]]:
            ring_members = np.flatnonzero(ring == ring[first[0]])
            if first[0] == ring_members[0] and last[-1] == ring_members[-1]:
                reps[0] = last + first
                reps.pop()
    dists = np.linalg.norm(shape.boundary_xy - z, axis=1)
    out = [int(min(cl, key=lambda i: (dists[i], i))) for cl in reps]
    return sorted(out)


def _ring_index_gap(shape: ShapeModel, i: int, j: int) -> int:
    if shape.boundary_ring[i] != shape.boundary_ring[j]:
        return 10**9
    members = np.flatnonzero(shape.boundary_ring == shape.boundary_ring[i])
    n = members.size
    lo, hi = members[0], members[-1]
    d = abs(i - j)
    return min(d, n - d)


def _clip_segment_to_box(p1, p2, lo, hi):
    """Liang-Barsky clip; returns (q1, q2, moved1, moved2) or None."""
    d = p2 - p1
    t0, t1 = 0.0, 1.0
    for axis in (0, 1):
        for sign, bound in ((-1.0, lo[axis]), (1.0, hi[axis])):
            p = sign * d[axis]
            q = sign * (bound - p1[axis]) if sign > 0 else p1[axis] - bound
            if p == 0.0:
                if q < 0.0:
                    return None
                continue
            t = q / p
            if p < 0.0:
                if t > t1:
                    return None
                t0 = max(t0, t)
            else:
                if t < t0:
                    return None
                t1 = min(t1, t)
    if t0 >= t1:
        return None
    return p1 + t0 * d, p1 + t1 * d, t0 > 0.0, t1 < 1.0


def medial_axis(shape: ShapeModel, kind: str = "interior") -> MedialAxisGraph:
    """Build the pruned interior or exterior medial-axis graph."""
    if kind not in ("interior", "exterior"):
        raise ValueError(f"unknown axis kind {kind!r}")
    samples = shape.boundary_xy
    if samples.shape[0] < 4:
        raise DegenerateGeometry("too few boundary samples for a medial axis")
    vor = scipy.spatial.Voronoi(samples)

    ridge_points = np.asarray(vor.ridge_points, dtype=np.intp)
    ridge_vertices = np.asarray(vor.ridge_vertices, dtype=np.intp)

    gi, gj = ridge_points[:, 0], ridge_points[:, 1]
    same_ring = shape.boundary_ring[gi] == shape.boundary_ring[gj]
    # circular index distance within the ring
    ring_sizes = np.bincount(shape.boundary_ring)
    ring_starts = np.concatenate([[0], np.cumsum(ring_sizes)[:-1]])
    li = gi - ring_starts[shape.boundary_ring[gi]]
    lj = gj - ring_starts[shape.boundary_ring[gj]]
    nring = ring_sizes[shape.boundary_ring[gi]]
    d = np.abs(li - lj)
    circ = np.minimum(d, nring - d)
    nonadjacent = ~same_ring | (circ > ADJACENT_SAMPLES)

    pad = EXTERIOR_PAD_FRAC * shape.diagonal
    box_lo = np.array([-pad, -pad])
    box_hi = np.array([shape.width + pad, shape.height + pad])
    ptp_center = samples.mean(axis=0)
    far = 4.0 * (shape.diagonal + pad)

    # candidate segments with stable vertex keys (negative keys = synthetic)
    seg_p1, seg_p2, seg_k1, seg_k2, seg_gen = [], [], [], [], []
    synth = {}

    def synth_key(pt):
        key = (round(float(pt[0]), 6), round(float(pt[1]), 6))
        if key not in synth:
            synth[key] = -(len(synth) + 1)
        return synth[key]

    for ridx in np.flatnonzero(nonadjacent):
        va, vb = ridge_vertices[ridx]
        a, b = ridge_points[ridx]
        if va >= 0 and vb >= 0:
            p1, p2 = vor.vertices[va], vor.vertices[vb]
            k1, k2 = int(va), int(vb)
        elif kind == "exterior" and (va >= 0 or vb >= 0):
            # reconstruct the unbounded ridge direction
            vfin = va if va >= 0 else vb
            p1 = vor.vertices[vfin]
            t = samples[b] - samples[a]
            norm = np.linalg.norm(t)
            if norm == 0:
                continue
            t = t / norm
            normal = np.array([-t[1], t[0]])
            midpoint = 0.5 * (samples[a] + samples[b])
            direction = normal if np.dot(midpoint - ptp_center, normal) > 0 else -normal
            p2 = p1 + direction * far
            k1, k2 = int(vfin), None
        else:
            continue
        if kind == "exterior":
            clipped = _clip_segment_to_box(np.asarray(p1, float), np.asarray(p2, float), box_lo, box_hi)
            if clipped is None:
                continue
            q1, q2, moved1, moved2 = clipped
            k1 = synth_key(q1) if (moved1 or k1 is None) else k1
            k2 = synth_key(q2) if (moved2 or k2 is None) else k2
            p1, p2 = q1, q2
        if k2 is None:
            continue
        seg_p1.append(np.asarray(p1, float))
        seg_p2.append(np.asarray(p2, float))
        seg_k1.append(k1)
        seg_k2.append(k2)
        seg_gen.append((int(a), int(b)))

    if not seg_p1:
        if kind == "interior":
            return _single_node_graph(shape, vor)
        # convex shapes have an empty exterior axis (unique projections)
        return _empty_graph(kind)

    v1 = np.asarray(seg_p1)
    v2 = np.asarray(seg_p2)
    mid = 0.5 * (v1 + v2)
    test_pts = np.concatenate([v1, v2, mid])
    inside = shapely.contains_xy(shape.polygon, test_pts[:, 0], test_pts[:, 1])
    n_seg = v1.shape[0]
    inside3 = inside[:n_seg] & inside[n_seg : 2 * n_seg] & inside[2 * n_seg :]
    outside3 = ~inside[:n_seg] & ~inside[n_seg : 2 * n_seg] & ~inside[2 * n_seg :]
    region_ok = inside3 if kind == "interior" else outside3
    length_ok = np.linalg.norm(v2 - v1, axis=1) > 1e-12
    kept = np.flatnonzero(region_ok & length_ok)
    if kept.size == 0:
        if kind == "interior":
            # rotationally symmetric shapes collapse to one medial point
            return _single_node_graph(shape, vor)
        return _empty_graph(kind)

    key_to_node = {}
    points_list = []
    edges = np.empty((kept.size, 2), dtype=np.intp)
    gen = np.empty((kept.size, 2), dtype=np.intp)
    for row, sidx in enumerate(kept):
        for col, (key, pt) in enumerate(((seg_k1[sidx], v1[sidx]), (seg_k2[sidx], v2[sidx]))):
            node = key_to_node.get(key)
            if node is None:
                node = len(points_list)
                key_to_node[key] = node
                points_list.append(pt)
            edges[row, col] = node
        gen[row] = seg_gen[sidx]
    points = np.asarray(points_list)

    tree = scipy.spatial.cKDTree(samples)
    radii, _ = tree.query(points)

    graph = _assemble(kind, points, radii, edges, gen, samples)
    graph = _prune_spurs(graph, shape)
    if kind == "interior" and graph.radii.size and float(graph.radii.min()) < 1.0:
        warnings.warn(
            "shape is thinner than 2 raster cells in places", ThinRegionWarning, stacklevel=2
        )
    return graph


def _empty_graph(kind: str) -> MedialAxisGraph:
    return MedialAxisGraph(
        kind=kind,
        points=np.empty((0, 2)),
        radii=np.empty(0),
        edges=np.empty((0, 2), dtype=np.intp),
        edge_generators=np.empty((0, 2), dtype=np.intp),
        projections=[],
        chains=[],
        node_chain=np.empty(0, dtype=np.intp),
        node_chain_pos=np.empty(0, dtype=np.intp),
        degrees=np.empty(0, dtype=np.intp),
    )


def _single_node_graph(shape: ShapeModel, vor) -> MedialAxisGraph:
    verts = vor.vertices
    inside = shapely.contains_xy(shape.polygon, verts[:, 0], verts[:, 1])
    if not inside.any():
        raise DegenerateGeometry("no interior medial structure found")
    tree = scipy.spatial.cKDTree(shape.boundary_xy)
    dist, _ = tree.query(verts[inside])
    pick = np.flatnonzero(inside)[int(np.argmax(dist))]
    point = verts[pick]
    proj = projections(shape, point)
    if len(proj) < 2:
        # the projection set is a whole ring; record an opposite pair
        d = np.linalg.norm(shape.boundary_xy - point, axis=1)
        near = np.flatnonzero(d <= d.min() + PROJECTION_TOL)
        i = int(near[np.argmin(d[near])])
        ring = shape.boundary_ring[i]
        total = shape.ring_lengths[ring]
        arc_gap = np.abs(shape.boundary_arc[near] - shape.boundary_arc[i])
        arc_gap = np.minimum(arc_gap, total - arc_gap)
        j = int(near[np.argmax(arc_gap)])
        proj = sorted({i, j})
    return MedialAxisGraph(
        kind="interior",
        points=point[None, :],
        radii=np.array([float(dist.max())]),
        edges=np.empty((0, 2), dtype=np.intp),
        edge_generators=np.empty((0, 2), dtype=np.intp),
        projections=[proj],
        chains=[{"nodes": [0], "closed": False}],
        node_chain=np.array([0], dtype=np.intp),
        node_chain_pos=np.array([0], dtype=np.intp),
        degrees=np.array([0]),
    )


def _assemble(kind, points, radii, edges, gen, samples) -> MedialAxisGraph:
    n = points.shape[0]
    proj = [set() for _ in range(n)]
    for (i, j), (a, b) in zip(edges, gen):
        proj[i].update((int(a), int(b)))
        proj[j].update((int(a), int(b)))
    degrees = np.bincount(edges.ravel(), minlength=n)
    chains, node_chain, node_pos = _build_chains(n, edges)
    return MedialAxisGraph(
        kind=kind,
        points=points,
        radii=radii,
        edges=edges,
        edge_generators=gen,
        projections=[sorted(s) for s in proj],
        chains=chains,
        node_chain=node_chain,
        node_chain_pos=node_pos,
        degrees=degrees,
    )


def _build_chains(n, edges):
    adj = [[] for _ in range(n)]
    for k, (i, j) in enumerate(edges):
        adj[i].append((int(j), k))
        adj[j].append((int(i), k))
    degrees = np.array([len(a) for a in adj])
    edge_used = np.zeros(edges.shape[0], dtype=bool)
    chains = []
    breakpoints = [i for i in range(n) if degrees[i] != 2]
    for start in breakpoints:
        for nbr, e0 in adj[start]:
            if edge_used[e0]:
                continue
            nodes = [start]
            edge_used[e0] = True
            prev, cur = start, nbr
            while True:
                nodes.append(cur)
                if degrees[cur] != 2:
                    break
                nxt = None
                for nb, ek in adj[cur]:
                    if not edge_used[ek]:
                        nxt = (nb, ek)
                        break
                if nxt is None:
                    break
                edge_used[nxt[1]] = True
                prev, cur = cur, nxt[0]
            chains.append({"nodes": nodes, "closed": False})
    # remaining edges belong to pure cycles
    for k in range(edges.shape[0]):
        if edge_used[k]:
            continue
        start = int(edges[k, 0])
        nodes = [start]
        edge_used[k] = True
        cur = int(edges[k, 1])
        while cur != start:
            nodes.append(cur)
            advanced = False
            for nb, ek in adj[cur]:
                if not edge_used[ek]:
                    edge_used[ek] = True
                    cur = nb
                    advanced = True
                    break
            if not advanced:
                break
        chains.append({"nodes": nodes, "closed": True})
    chains.sort(key=lambda c: (c["nodes"][0], c["nodes"][-1], len(c["nodes"])))
    node_chain = -np.ones(n, dtype=np.intp)
    node_pos = np.zeros(n, dtype=np.intp)
    for cid, chain in enumerate(chains):
        for pos, node in enumerate(chain["nodes"]):
            if node_chain[node] == -1:
                node_chain[node] = cid
                node_pos[node] = pos
    return chains, node_chain, node_pos


def _projection_gap(graph: MedialAxisGraph, node: int, samples: np.ndarray) -> float:
    pr = graph.projections[node]
    if len(pr) < 2:
        return 0.0
    z = graph.points[node]
    best = 0.0
    for a in pr:
        for b in pr:
            if a >= b:
                continue
            u = samples[a] - z
            v = samples[b] - z
            nu, nv = np.linalg.norm(u), np.linalg.norm(v)
            if nu <= 0 or nv <= 0:
                continue
            cosang = float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
            best = max(best, math.acos(cosang))
    return best


def _prune_spurs(graph: MedialAxisGraph, shape: ShapeModel) -> MedialAxisGraph:
    threshold = PRUNE_RADIUS_FRAC * shape.diagonal
    samples = shape.boundary_xy
    for _ in range(8):
        doomed_edges = set()
        for chain in graph.chains:
            if chain["closed"]:
                continue
            nodes = chain["nodes"]
            for end in (nodes[0], nodes[-1]):
                if graph.degrees[end] != 1:
                    continue
                if graph.radii[end] >= threshold:
                    continue
                if _projection_gap(graph, end, samples) > CORNER_GAP_RAD:
                    continue
                pairs = set(zip(nodes[:-1], nodes[1:]))
                for k, (i, j) in enumerate(graph.edges):
                    if (i, j) in pairs or (j, i) in pairs:
                        doomed_edges.add(k)
                break
        if not doomed_edges:
            break
        keep = np.ones(graph.edges.shape[0], dtype=bool)
        keep[list(doomed_edges)] = False
        edges = graph.edges[keep]
        gen = graph.edge_generators[keep]
        if edges.size == 0:
            break
        used = np.unique(edges)
        remap = -np.ones(graph.n_nodes, dtype=np.intp)
        remap[used] = np.arange(used.size)
        graph = _assemble(
            graph.kind, graph.points[used], graph.radii[used], remap[edges], gen, samples
        )
    return graph


def nearest_medial(shape: ShapeModel, graph: MedialAxisGraph, z) -> int:
    """Index of the graph node closest to z; ties break toward the lowest
    chain index / chain position."""
    z = np.asarray(z, dtype=float)
    tree = graph.kdtree()
    k = min(8, graph.n_nodes)
    dist, idx = tree.query(z, k=k)
    dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
    dmin = dist[0]
    tied = idx[dist <= dmin + 1e-12]
    return int(min(tied, key=lambda i: (graph.node_chain[i], graph.node_chain_pos[i], i)))


def _principal_direction(graph: MedialAxisGraph, node: int, radius: float) -> np.ndarray:
    near = graph.kdtree().query_ball_point(graph.points[node], radius)
    pts = graph.points[near]
    if pts.shape[0] < 2:
        return np.array([1.0, 0.0])
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    d = vecs[:, -1]
    return d / np.linalg.norm(d)


def direction_at(shape: ShapeModel, graph: MedialAxisGraph, z):
    """(axial, crosswise) unit vectors at the medial point nearest z."""
    node = nearest_medial(shape, graph, z)
    cid = graph.node_chain[node]
    axial = None
    if cid >= 0:
        chain = graph.chains[cid]
        nodes = chain["nodes"]
        pos = int(graph.node_chain_pos[node])
        n = len(nodes)
        if n >= 2:
            if chain["closed"]:
                before = graph.points[nodes[(pos - 1) % n]]
                after = graph.points[nodes[(pos + 1) % n]]
            else:
                before = graph.points[nodes[max(0, pos - 1)]]
                after = graph.points[nodes[min(n - 1, pos + 1)]]
            d = after - before
            norm = np.linalg.norm(d)
            if norm > 1e-12:
                axial = d / norm
    if axial is None:
        axial = _principal_direction(graph, node, FALLBACK_RADIUS_FRAC * shape.diagonal)
    crosswise = np.array([-axial[1], axial[0]])
    return axial, crosswise


def chord_residual(shape: ShapeModel, i: int, j: int) -> float:
    """Boundary-geodesic minus chord length between two boundary samples.

    Cross-ring pairs have no boundary geodesic and rank as +inf (they are
    excluded from the center argmax).
    """
    if shape.boundary_ring[i] != shape.boundary_ring[j]:
        return math.inf
    total = shape.ring_lengths[shape.boundary_ring[i]]
    d = abs(shape.boundary_arc[i] - shape.boundary_arc[j])
    dist_b = min(d, total - d)
    chord = float(np.linalg.norm(shape.boundary_xy[i] - shape.boundary_xy[j]))
    return max(0.0, dist_b - chord)


def _best_cr(shape: ShapeModel, proj: list) -> float:
    best = -math.inf
    for a in range(len(proj)):
        for b in range(a + 1, len(proj)):
            cr = chord_residual(shape, proj[a], proj[b])
            if math.isfinite(cr) and cr > best:
                best = cr
    return best


def shape_center(shape: ShapeModel, graph: MedialAxisGraph) -> int:
    """Medial node whose projection pair maximizes the chord residual."""
    best = None
    best_key = None
    for node in range(graph.n_nodes):
        proj = graph.projections[node]
        if len(proj) < 2:
            continue
        cr = _best_cr(shape, proj)
        if not math.isfinite(cr):
            continue
        key = (-cr, -graph.radii[node], graph.node_chain[node], graph.node_chain_pos[node])
        if best_key is None or key < best_key:
            best_key = key
            best = node
    if best is None:
        raise DegenerateGeometry("no valid medial point for the shape center")
    return int(best)


def medial_geodesic(graph: MedialAxisGraph, m1: int, m2: int) -> float:
    """Shortest-path length along graph edges; +inf when disconnected."""
    if m1 == m2:
        return 0.0
    dist = graph.geodesics_from(m1)[m2]
    return float(dist)
