"""Binary slicing trees over patches: leaf budgeting, balanced/unbalanced
growth, and the recursive slicing (centroid splits along the local axis
directions) that maps a configured tree to a cell tiling."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionViolated, SliceFailure
from .geometry import ConvexPolygon, centroid, split_by_line
from .medial import direction_at

AXIAL = "A"
CROSSWISE = "C"
NORMAL = "normal"
SWAPPED = "swapped"

DEFAULT_UNBALANCED_PROB = 0.7


class DirectionField:
    """Point -> (axial, crosswise) lookup backed by the interior axis."""

    def __init__(self, shape, graph):
        self.shape = shape
        self.graph = graph

    def at(self, z):
        return direction_at(self.shape, self.graph, z)


class MabstNode:
    """Slicing-tree node; leaves carry an image slot, inner nodes carry a
    cut direction and child order."""

    __slots__ = ("left", "right", "cut_direction", "child_order", "polygon", "assigned_image")

    def __init__(self):
        self.left = None
        self.right = None
        self.cut_direction = None  # AXIAL | CROSSWISE | None
        self.child_order = None  # NORMAL | SWAPPED | None
        self.polygon = None
        self.assigned_image = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def height(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.height(), self.right.height())

    def min_leaf_depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + min(self.left.min_leaf_depth(), self.right.min_leaf_depth())

    def leaf_count(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.leaf_count() + self.right.leaf_count()

    def leaves(self):
        """Leaves in left-to-right order."""
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def inner_preorder(self):
        if not self.is_leaf:
            yield self
            yield from self.left.inner_preorder()
            yield from self.right.inner_preorder()


@dataclass
class PatchTree:
    patch: object
    root: MabstNode
    leaf_budget: int
    seed: int = 0
    elevations: dict = field(default_factory=dict, repr=False)

    def refresh_elevations(self) -> None:
        self.elevations = compute_elevations(self.root)


def compute_elevations(root: MabstNode) -> dict:
    height = root.height()
    out = {}

    def walk(node, depth):
        out[id(node)] = height - depth
        if not node.is_leaf:
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

    walk(root, 0)
    return out


def allocate_leaf_budgets(patches, n_images: int) -> list:
    """Round N_I * area_share per patch, then repair to an exact total by
    largest-remainder with a floor of one leaf per patch."""
    shares = [p.area_share for p in patches]
    if n_images < len(patches):
        raise PreconditionViolated(
            f"{n_images} images cannot fill {len(patches)} patches; merge patches first"
        )
    total_share = sum(shares)
    if abs(total_share - 1.0) > 1e-6:
        shares = [s / total_share for s in shares]
    quotas = [n_images * s for s in shares]
    budgets = [max(1, math.floor(q + 0.5)) for q in quotas]
    while sum(budgets) > n_images:
        surplus = [
            (b - q, b, -i)
            for i, (b, q) in enumerate(zip(budgets, quotas))
        ]
        # take from the patch whose allocation most exceeds its quota
        order = sorted(range(len(budgets)), key=lambda i: (-(budgets[i] - quotas[i]), -budgets[i], i))
        for i in order:
            if budgets[i] > 1:
                budgets[i] -= 1
                break
        else:  # pragma: no cover - n_images >= len(patches) rules this out
            raise PreconditionViolated("cannot repair leaf budgets")
        del surplus
    while sum(budgets) < n_images:
        order = sorted(range(len(budgets)), key=lambda i: (budgets[i] - quotas[i], budgets[i], i))
        budgets[order[0]] += 1
    return budgets


def grow_tree(
    budget: int,
    mode: str = "balanced",
    seed: int = 0,
    unbalanced_prob: float = DEFAULT_UNBALANCED_PROB,
) -> MabstNode:
    """Grow a tree with exactly `budget` leaves by propagating split
    commands from the root; balanced descends into the shallower child,
    unbalanced into the deeper one with probability `unbalanced_prob`."""
    if budget < 1:
        raise PreconditionViolated("leaf budget must be >= 1")
    if mode not in ("balanced", "unbalanced"):
        raise ValueError(f"unknown growth mode {mode!r}")
    rng = random.Random(seed)
    root = MabstNode()
    for _ in range(budget - 1):
        node = root
        while not node.is_leaf:
            hl = node.left.height()
            hr = node.right.height()
            if mode == "balanced":
                # descend toward the shallowest leaf so growth fills levels
                # completely (height stays at ceil(log2 leaves))
                dl = node.left.min_leaf_depth()
                dr = node.right.min_leaf_depth()
                if dl < dr:
                    node = node.left
                elif dr < dl:
                    node = node.right
                else:
                    node = node.left if rng.random() < 0.5 else node.right
            else:
                if rng.random() < unbalanced_prob:
                    if hl > hr:
                        node = node.left
                    elif hr > hl:
                        node = node.right
                    else:
                        node = node.left if rng.random() < 0.5 else node.right
                else:
                    node = node.left if rng.random() < 0.5 else node.right
        node.left = MabstNode()
        node.right = MabstNode()
    return root


def dpg(polygon: ConvexPolygon, direction: str, field: DirectionField):
    """Split a convex polygon in half through its centroid, along the local
    axial or crosswise direction."""
    ct = centroid(polygon)
    axial, crosswise = field.at(ct)
    d = axial if direction == AXIAL else crosswise
    return split_by_line(polygon, ct, d)


def sas(tree: PatchTree, field: DirectionField) -> list:
    """Slice the patch by the configured tree; returns (leaf, polygon) pairs
    in left-to-right order."""
    cells = []

    def walk(node, polygon, path):
        node.polygon = polygon
        if node.is_leaf:
            cells.append((node, polygon))
            return
        if node.cut_direction not in (AXIAL, CROSSWISE) or node.child_order not in (
            NORMAL,
            SWAPPED,
        ):
            raise SliceFailure(f"unconfigured inner node at path {path or 'root'}")
        try:
            p1, p2 = dpg(polygon, node.cut_direction, field)
        except Exception as exc:
            raise SliceFailure(f"split failed at path {path or 'root'}: {exc}") from exc
        if node.child_order == NORMAL:
            walk(node.left, p1, path + "L")
            walk(node.right, p2, path + "R")
        else:
            walk(node.left, p2, path + "L")
            walk(node.right, p1, path + "R")

    walk(tree.root, tree.patch.polygon, "")
    return cells


def elevation_index(trees: list) -> list:
    """Leaves across all trees ordered by (elevation desc, patch prominence
    desc, left-to-right position asc)."""
    rows = []
    for t_idx, tree in enumerate(trees):
        if not tree.elevations:
            tree.refresh_elevations()
        pp = tree.patch.prominence
        for pos, leaf in enumerate(tree.root.leaves()):
            rows.append((tree.elevations[id(leaf)], pp, t_idx, pos, leaf))
    rows.sort(key=lambda r: (-r[0], -r[1], r[2], r[3]))
    return [
        {"tree": r[2], "leaf": r[4], "elevation": r[0], "prominence": r[1], "position": r[3]}
        for r in rows
    ]


def tree_to_text(node: MabstNode) -> str:
    """Parenthesized dump: `(A Normal (leaf img3) (leaf img1))`."""
    if node.is_leaf:
        image = node.assigned_image
        image = getattr(image, "id", image) if image is not None else "?"
        return f"(leaf {image})"
    d = node.cut_direction or "?"
    k = {NORMAL: "Normal", SWAPPED: "Swapped", None: "?"}[node.child_order]
    return f"({d} {k} {tree_to_text(node.left)} {tree_to_text(node.right)})"
