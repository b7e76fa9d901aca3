"""Image-to-leaf assignment and the penalized-area configuration search.

Inner nodes above the elevation threshold are pre-configured by the extent
heuristic; each remaining subtree is enumerated exhaustively. Splits and
leaf fits are cached by polygon identity, and per-configuration scores are
combined as vectorized left+right sums, so shared prefixes are computed
once while every configuration is still scored and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionViolated
from .geometry import ConvexPolygon, RectSpec, centroid, is_triangle, max_inscribed_rect
from .medial import medial_geodesic, nearest_medial
from .tree import AXIAL, CROSSWISE, NORMAL, SWAPPED, PatchTree, dpg, elevation_index, sas

TRIANGLE_PENALTY = 0.8
DEFAULT_TAU_E = 3
# refuse enumerations beyond 4^MAX_FREE_NODES configurations per subtree
MAX_FREE_NODES = 13

# option order fixes the lexicographic tie-break: A < C, Normal < Swapped
OPTIONS = ((AXIAL, NORMAL), (AXIAL, SWAPPED), (CROSSWISE, NORMAL), (CROSSWISE, SWAPPED))


@dataclass
class FittedBox:
    rect: RectSpec
    area: float
    penalized_area: float
    image_id: str


@dataclass
class Configuration:
    assignments: dict  # preorder index -> (direction, child order)
    e_area: float
    evaluated: int  # configurations scored during the search


@dataclass
class TreeResult:
    tree: PatchTree
    configuration: Configuration
    cells: list  # (leaf node, polygon) left-to-right
    fitted: list  # FittedBox per cell, same order


def patch_prominence(patch, shape, graph, center_node, center_distances=None) -> float:
    """Inverse of (drop to the axis + geodesic along the axis to the center)."""
    pe = centroid(patch.polygon)
    phi = nearest_medial(shape, graph, pe)
    drop = float(np.linalg.norm(pe - graph.points[phi]))
    if center_distances is not None:
        geo = float(center_distances[phi])
    else:
        geo = medial_geodesic(graph, center_node, phi)
    if not math.isfinite(geo):
        return 0.0
    eps = 1e-6 * shape.diagonal
    return 1.0 / (drop + geo + eps)


def assign_images(trees: list, images: list) -> None:
    """Zip the cross-tree elevation ordering with images by rank."""
    total = sum(t.leaf_budget for t in trees)
    if total != len(images):
        raise PreconditionViolated(f"{total} leaves but {len(images)} images")
    if any(r.rank is None for r in images):
        raise PreconditionViolated("images must be ranked before assignment")
    ranked = sorted(images, key=lambda r: r.rank)
    rows = elevation_index(trees)
    for row, record in zip(rows, ranked):
        row["leaf"].assigned_image = record


def fit_box(leaf_polygon: ConvexPolygon, image, triangle_penalty: float = TRIANGLE_PENALTY) -> FittedBox:
    """Largest aspect-matched box in the cell, with the triangle penalty."""
    rect = max_inscribed_rect(leaf_polygon, image.salient_box.aspect)
    penalty = triangle_penalty if is_triangle(leaf_polygon) else 1.0
    return FittedBox(
        rect=rect, area=rect.area, penalized_area=rect.area * penalty, image_id=image.id
    )


def _extent_direction(polygon: ConvexPolygon, field) -> str:
    """Pre-configuration heuristic: cut across the longer pseudo-axis."""
    ct = centroid(polygon)
    axial, crosswise = field.at(ct)
    v = polygon.vertices
    ext_a = float((v @ axial).max() - (v @ axial).min())
    ext_c = float((v @ crosswise).max() - (v @ crosswise).min())
    return CROSSWISE if ext_a > ext_c else AXIAL


class _Searcher:
    """Per-tree enumeration state: preorder keys, caches, instrumentation."""

    def __init__(self, tree: PatchTree, field, triangle_penalty: float = TRIANGLE_PENALTY):
        self.tree = tree
        self.field = field
        self.triangle_penalty = triangle_penalty
        self.preorder = {}
        for idx, node in enumerate(tree.root.inner_preorder()):
            self.preorder[id(node)] = idx
        self.split_cache = {}
        self.fit_cache = {}
        self.inner_counts = {}
        self._count_inner(tree.root)

    def _count_inner(self, node):
        if node.is_leaf:
            self.inner_counts[id(node)] = 0
            return 0
        n = 1 + self._count_inner(node.left) + self._count_inner(node.right)
        self.inner_counts[id(node)] = n
        return n

    def split(self, polygon: ConvexPolygon, direction: str):
        key = (polygon.key(), direction)
        out = self.split_cache.get(key)
        if out is None:
            out = dpg(polygon, direction, self.field)
            self.split_cache[key] = out
        return out

    def leaf_value(self, leaf, polygon: ConvexPolygon) -> float:
        key = (id(leaf), polygon.key())
        val = self.fit_cache.get(key)
        if val is None:
            val = fit_box(polygon, leaf.assigned_image, self.triangle_penalty).penalized_area
            self.fit_cache[key] = val
        return val

    def enumerate_values(self, node, polygon: ConvexPolygon, memo) -> np.ndarray:
        """Score every configuration of the subtree; index encoding is
        lexicographic over (this node's option, left config, right config)."""
        key = (id(node), polygon.key())
        vals = memo.get(key)
        if vals is not None:
            return vals
        if node.is_leaf:
            vals = np.array([self.leaf_value(node, polygon)])
        else:
            blocks = []
            for direction, order in OPTIONS:
                p1, p2 = self.split(polygon, direction)
                pl, pr = (p1, p2) if order == NORMAL else (p2, p1)
                lvals = self.enumerate_values(node.left, pl, memo)
                rvals = self.enumerate_values(node.right, pr, memo)
                blocks.append((lvals[:, None] + rvals[None, :]).ravel())
            vals = np.concatenate(blocks)
        memo[key] = vals
        return vals

    def decode(self, node, polygon: ConvexPolygon, index: int, out: dict) -> None:
        if node.is_leaf:
            return
        nl = 4 ** self.inner_counts[id(node.left)]
        nr = 4 ** self.inner_counts[id(node.right)]
        block = nl * nr
        opt, rem = divmod(int(index), block)
        il, ir = divmod(rem, nr)
        direction, order = OPTIONS[opt]
        out[self.preorder[id(node)]] = (direction, order)
        p1, p2 = self.split(polygon, direction)
        pl, pr = (p1, p2) if order == NORMAL else (p2, p1)
        self.decode(node.left, pl, il, out)
        self.decode(node.right, pr, ir, out)


def search_configuration(
    tree: PatchTree, field, tau_e: float = DEFAULT_TAU_E, triangle_penalty: float = TRIANGLE_PENALTY
) -> TreeResult:
    """Pre-configure high nodes, exhaustively search each boundary subtree,
    and return the argmax configuration with its cells and fitted boxes."""
    if not tree.elevations:
        tree.refresh_elevations()
    searcher = _Searcher(tree, field, triangle_penalty)
    assignments = {}
    e_area = 0.0
    evaluated = 0

    def free_count(node):
        return searcher.inner_counts[id(node)]

    def walk(node, polygon):
        nonlocal e_area, evaluated
        elevation = tree.elevations[id(node)]
        if node.is_leaf:
            if elevation > tau_e:
                # fixed leaf above the searched boundary: constant term
                e_area += searcher.leaf_value(node, polygon)
            else:
                e_area += _search_subtree(node, polygon)
            return
        if elevation > tau_e:
            direction = _extent_direction(polygon, field)
            assignments[searcher.preorder[id(node)]] = (direction, NORMAL)
            p1, p2 = searcher.split(polygon, direction)
            walk(node.left, p1)
            walk(node.right, p2)
        else:
            e_area += _search_subtree(node, polygon)

    def _search_subtree(node, polygon) -> float:
        nonlocal evaluated
        free = free_count(node)
        if free > MAX_FREE_NODES:
            raise PreconditionViolated(
                f"subtree enumeration of 4^{free} configurations is too large; "
                f"lower tau_e or use fewer leaves"
            )
        memo = {}
        vals = searcher.enumerate_values(node, polygon, memo)
        evaluated += vals.size
        best = int(np.argmax(vals))
        searcher.decode(node, polygon, best, assignments)
        return float(vals[best])

    walk(tree.root, tree.patch.polygon)

    for node in tree.root.inner_preorder():
        direction, order = assignments[searcher.preorder[id(node)]]
        node.cut_direction = direction
        node.child_order = order
    cells = sas(tree, field)
    fitted = [
        fit_box(polygon, leaf.assigned_image, triangle_penalty) for leaf, polygon in cells
    ]
    config = Configuration(assignments=assignments, e_area=e_area, evaluated=evaluated)
    return TreeResult(tree=tree, configuration=config, cells=cells, fitted=fitted)


def optimize_all(
    trees: list,
    field,
    tau_e: float = DEFAULT_TAU_E,
    brute_force: bool = False,
    triangle_penalty: float = TRIANGLE_PENALTY,
) -> list:
    """Independent per-tree searches; brute force disables pre-configuration."""
    effective = math.inf if brute_force else tau_e
    return [search_configuration(tree, field, effective, triangle_penalty) for tree in trees]
