import math

import numpy as np
import pytest

from shapecollage.decompose import Patch
from shapecollage.errors import PreconditionViolated, SliceFailure
from shapecollage.geometry import ConvexPolygon
from shapecollage.medial import medial_axis
from shapecollage.shape import build_shape_model
from shapecollage.tree import (
    AXIAL,
    CROSSWISE,
    NORMAL,
    SWAPPED,
    DirectionField,
    PatchTree,
    allocate_leaf_budgets,
    compute_elevations,
    dpg,
    elevation_index,
    grow_tree,
    sas,
    tree_to_text,
)

import shapes


class FixedField:
    """Direction field stub with a constant axial direction."""

    def __init__(self, axial=(1.0, 0.0)):
        self.axial = np.asarray(axial, dtype=float)

    def at(self, z):
        a = self.axial / np.linalg.norm(self.axial)
        return a, np.array([-a[1], a[0]])


def make_patch(vertices, share=1.0, pid=0):
    return Patch(id=pid, polygon=ConvexPolygon(vertices), area_share=share)


UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


class TestAllocateLeafBudgets:
    def test_plain_rounding(self):
        patches = [make_patch(UNIT_SQUARE, 0.28, 0), make_patch(UNIT_SQUARE, 0.72, 1)]
        assert allocate_leaf_budgets(patches, 10) == [3, 7]

    def test_largest_remainder_repair(self):
        patches = [make_patch(UNIT_SQUARE, 0.55, 0), make_patch(UNIT_SQUARE, 0.45, 1)]
        assert allocate_leaf_budgets(patches, 10) == [5, 5]

    def test_single_patch(self):
        assert allocate_leaf_budgets([make_patch(UNIT_SQUARE, 1.0)], 7) == [7]

    def test_floor_one(self):
        patches = [make_patch(UNIT_SQUARE, 0.98, 0), make_patch(UNIT_SQUARE, 0.02, 1)]
        budgets = allocate_leaf_budgets(patches, 5)
        assert budgets == [4, 1]

    def test_too_few_images(self):
        patches = [make_patch(UNIT_SQUARE, 0.5, 0), make_patch(UNIT_SQUARE, 0.5, 1)]
        with pytest.raises(PreconditionViolated):
            allocate_leaf_budgets(patches, 1)

    def test_total_always_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            k = int(rng.integers(1, 8))
            shares = rng.dirichlet(np.ones(k))
            n = int(rng.integers(k, 40))
            patches = [make_patch(UNIT_SQUARE, s, i) for i, s in enumerate(shares)]
            budgets = allocate_leaf_budgets(patches, n)
            assert sum(budgets) == n
            assert min(budgets) >= 1


class TestGrowTree:
    def test_budget_one(self):
        root = grow_tree(1, seed=3)
        assert root.is_leaf and root.leaf_count() == 1

    def test_budget_four_balanced_complete(self):
        for seed in range(20):
            root = grow_tree(4, "balanced", seed=seed)
            assert root.leaf_count() == 4
            assert root.height() == 2
            elev = compute_elevations(root)
            assert elev[id(root)] == 2
            assert all(elev[id(l)] == 0 for l in root.leaves())

    def test_balanced_height_bound(self):
        for budget in range(1, 65):
            root = grow_tree(budget, "balanced", seed=budget)
            assert root.leaf_count() == budget
            assert root.height() == math.ceil(math.log2(budget)) if budget > 1 else True

    def test_unbalanced_leans_degenerate(self):
        tall = 0
        for seed in range(1000):
            root = grow_tree(5, "unbalanced", seed=seed)
            assert root.leaf_count() == 5
            if root.height() >= 3:
                tall += 1
        assert tall >= 600  # balanced height for 5 leaves is exactly 3

    def test_seed_determinism(self):
        a = grow_tree(9, "unbalanced", seed=123)
        b = grow_tree(9, "unbalanced", seed=123)
        assert tree_to_text(a) == tree_to_text(b)

        def shape_sig(node):
            if node.is_leaf:
                return "."
            return f"({shape_sig(node.left)}{shape_sig(node.right)})"

        assert shape_sig(a) == shape_sig(b)


class TestDpg:
    def test_square_axial_split(self):
        poly = ConvexPolygon(UNIT_SQUARE)
        p1, p2 = dpg(poly, AXIAL, FixedField((1, 0)))
        # axial = horizontal line through centroid -> top/bottom halves
        assert abs(p1.area - 0.5) < 1e-12 and abs(p2.area - 0.5) < 1e-12
        ys = sorted([p1.vertices[:, 1].mean(), p2.vertices[:, 1].mean()])
        assert ys[0] < 0.5 < ys[1]

    def test_square_crosswise_split(self):
        poly = ConvexPolygon(UNIT_SQUARE)
        p1, p2 = dpg(poly, CROSSWISE, FixedField((1, 0)))
        xs = sorted([p1.vertices[:, 0].mean(), p2.vertices[:, 0].mean()])
        assert xs[0] < 0.5 < xs[1]

    def test_annulus_local_tangent(self):
        shape = build_shape_model(shapes.annulus(), resolution=384)
        graph = medial_axis(shape, "interior")
        field = DirectionField(shape, graph)
        center = np.array([192.0, 192.0])
        # small square patch sitting on the ring at angle 0
        mid_r = 0.5 * (1.4 + 3.0) / 6.0 * 384
        c = center + np.array([mid_r, 0.0])
        poly = ConvexPolygon(c + np.array([(-14, -14), (14, -14), (14, 14), (-14, 14)]))
        p1, p2 = dpg(poly, AXIAL, field)
        # at angle 0 the skeleton tangent is vertical: split line vertical,
        # halves side by side horizontally
        xs = sorted([p1.vertices[:, 0].mean(), p2.vertices[:, 0].mean()])
        assert xs[1] - xs[0] > 7


class TestSas:
    def _tree(self, budget, seed=0):
        patch = make_patch([(0, 0), (8, 0), (8, 8), (0, 8)])
        root = grow_tree(budget, "balanced", seed=seed)
        return PatchTree(patch=patch, root=root, leaf_budget=budget)

    def test_single_leaf_identity(self):
        tree = self._tree(1)
        cells = sas(tree, FixedField())
        assert len(cells) == 1
        assert np.allclose(cells[0][1].vertices, tree.patch.polygon.vertices)

    def test_two_leaf_stacked(self):
        tree = self._tree(2)
        tree.root.cut_direction = AXIAL
        tree.root.child_order = NORMAL
        cells = sas(tree, FixedField((1, 0)))
        assert len(cells) == 2
        assert abs(cells[0][1].area - 32.0) < 1e-9
        assert abs(cells[1][1].area - 32.0) < 1e-9

    def test_swapped_order(self):
        tree = self._tree(2)
        tree.root.cut_direction = CROSSWISE
        tree.root.child_order = SWAPPED
        cells_swapped = sas(tree, FixedField((1, 0)))
        tree.root.child_order = NORMAL
        cells_normal = sas(tree, FixedField((1, 0)))
        assert np.allclose(
            cells_swapped[0][1].vertices.mean(axis=0),
            cells_normal[1][1].vertices.mean(axis=0),
        )

    def test_eight_leaf_tiling(self):
        tree = self._tree(8, seed=5)
        for node in tree.root.inner_preorder():
            node.cut_direction = AXIAL if node.height() % 2 == 0 else CROSSWISE
            node.child_order = NORMAL
        cells = sas(tree, FixedField((1, 0)))
        assert len(cells) == 8
        total = sum(c[1].area for c in cells)
        assert abs(total - 64.0) <= 1e-6 * 64.0

    def test_unconfigured_raises(self):
        tree = self._tree(2)
        with pytest.raises(SliceFailure):
            sas(tree, FixedField())

    def test_leaf_count_exactness(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            budget = int(rng.integers(1, 17))
            tree = self._tree(budget, seed=int(rng.integers(0, 1000)))
            for node in tree.root.inner_preorder():
                node.cut_direction = AXIAL if rng.random() < 0.5 else CROSSWISE
                node.child_order = NORMAL if rng.random() < 0.5 else SWAPPED
            cells = sas(tree, FixedField())
            assert len(cells) == budget == tree.leaf_budget
            total = sum(c[1].area for c in cells)
            assert abs(total - 64.0) <= 1e-6 * 64.0

    def test_elevation_recompute_consistency(self):
        for seed in range(10):
            root = grow_tree(7, "unbalanced", seed=seed)
            elev = compute_elevations(root)
            h = root.height()

            def walk(node, depth):
                assert elev[id(node)] == h - depth
                if not node.is_leaf:
                    walk(node.left, depth + 1)
                    walk(node.right, depth + 1)

            walk(root, 0)


class TestElevationIndex:
    def test_higher_tree_first(self):
        p0 = make_patch(UNIT_SQUARE, 0.5, 0)
        p0.prominence = 0.3
        p1 = make_patch(UNIT_SQUARE, 0.5, 1)
        p1.prominence = 0.3
        t0 = PatchTree(patch=p0, root=grow_tree(4, seed=1), leaf_budget=4)
        t1 = PatchTree(patch=p1, root=grow_tree(2, seed=1), leaf_budget=2)
        rows = elevation_index([t0, t1])
        assert [r["elevation"] for r in rows] == sorted(
            [r["elevation"] for r in rows], reverse=True
        )
        assert rows[0]["tree"] == 0

    def test_prominence_breaks_ties(self):
        p0 = make_patch(UNIT_SQUARE, 0.5, 0)
        p0.prominence = 0.2
        p1 = make_patch(UNIT_SQUARE, 0.5, 1)
        p1.prominence = 0.5
        t0 = PatchTree(patch=p0, root=grow_tree(2, seed=1), leaf_budget=2)
        t1 = PatchTree(patch=p1, root=grow_tree(2, seed=1), leaf_budget=2)
        rows = elevation_index([t0, t1])
        assert rows[0]["tree"] == 1

    def test_left_to_right_within_tree(self):
        p0 = make_patch(UNIT_SQUARE, 1.0, 0)
        p0.prominence = 1.0
        t0 = PatchTree(patch=p0, root=grow_tree(4, seed=2), leaf_budget=4)
        rows = elevation_index([t0])
        positions = [r["position"] for r in rows]
        assert positions == sorted(positions)


class TestTreeText:
    def test_format(self):
        root = MabstNodeFactory()
        assert tree_to_text(root) == "(A Normal (leaf img3) (C Swapped (leaf img1) (leaf img2)))"


def MabstNodeFactory():
    from shapecollage.tree import MabstNode

    root = MabstNode()
    root.cut_direction = AXIAL
    root.child_order = NORMAL
    root.left = MabstNode()
    root.left.assigned_image = "img3"
    inner = MabstNode()
    inner.cut_direction = CROSSWISE
    inner.child_order = SWAPPED
    inner.left = MabstNode()
    inner.left.assigned_image = "img1"
    inner.right = MabstNode()
    inner.right.assigned_image = "img2"
    root.right = inner
    return root
