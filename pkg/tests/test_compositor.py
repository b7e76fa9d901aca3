import numpy as np
import pytest

from shapecollage.compositor import (
    CROP,
    WARP,
    LayoutCell,
    apply_warp,
    assign_pixels,
    build_warp_plan,
    choose_mode,
    cover_rect,
    rasterize_convex,
    render,
    source_coords,
    _apply_affine,
)
from shapecollage.geometry import ConvexPolygon, RectSpec
from shapecollage.manifest import ImageRecord
from shapecollage.shape import build_shape_model

import shapes


def image_record(rid, w, h, box=None):
    if box is None:
        rect = RectSpec(w / 2, h / 2, float(w), float(h))
    else:
        rect = RectSpec(*box)
    return ImageRecord(id=rid, path="", width=w, height=h, salient_box=rect)


SQ_CELL = ConvexPolygon([(10, 10), (40, 10), (40, 40), (10, 40)])


class TestChooseMode:
    def test_huge_image_small_cell_crops(self):
        img = image_record("a", 1000, 1000, box=(500, 500, 50, 50))
        fitted = RectSpec(25, 25, 10, 10)
        assert choose_mode(img, img.salient_box, SQ_CELL, fitted) == CROP

    def test_full_frame_salient_warps(self):
        img = image_record("a", 100, 100)  # salient box = whole frame
        fitted = RectSpec(25, 25, 10, 10)
        assert choose_mode(img, img.salient_box, SQ_CELL, fitted) == WARP

    def test_exact_cover_counts_as_crop(self):
        # frame scaled onto the fitted box lands exactly on the cell bbox
        img = image_record("a", 100, 100, box=(50, 50, 50, 50))
        fitted = RectSpec(25, 25, 15, 15)  # frame maps to 30x30 = the cell
        assert choose_mode(img, img.salient_box, SQ_CELL, fitted) == CROP


class TestBuildWarpPlan:
    def test_identity_equivalent_plan(self):
        img = image_record("a", 30, 30)
        cell = SQ_CELL
        fitted = RectSpec(25, 25, 30, 30)
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        # salient box == frame: annulus collapses, similarity handles all
        assert plan.triangles == []
        s = plan.box_affine
        assert s[0, 0] == pytest.approx(1.0) and s[1, 1] == pytest.approx(1.0)
        assert s[0, 1] == 0.0 and s[1, 0] == 0.0

    def test_centered_annulus_eight_triangles(self):
        img = image_record("a", 100, 80, box=(50, 40, 40, 20))
        fitted = RectSpec(25, 25, 12, 6)
        plan = build_warp_plan(img, img.salient_box, SQ_CELL, fitted)
        assert plan.mode == WARP
        assert len(plan.triangles) == 8

    def test_salient_corners_map_to_fitted_corners(self):
        img = image_record("a", 120, 90, box=(60, 45, 40, 30))
        fitted = RectSpec(24, 26, 8, 6)
        plan = build_warp_plan(img, img.salient_box, SQ_CELL, fitted)
        assert plan.mode == WARP
        src_corners = img.salient_box.corners()
        dst_corners = fitted.corners()
        got = _apply_affine(plan.box_affine, src_corners)
        assert np.abs(got - dst_corners).max() < 1e-6
        # every triangle touching a salient corner maps it identically
        for tri, aff in zip(plan.triangles, plan.affines):
            for vid in tri:
                if vid >= 4:
                    want = dst_corners[vid - 4]
                    have = _apply_affine(aff, src_corners[vid - 4][None, :])[0]
                    assert np.abs(have - want).max() < 1e-6

    def test_continuity_on_shared_edges(self):
        img = image_record("a", 100, 100, box=(55, 45, 30, 30))
        fitted = RectSpec(23, 27, 8, 8)
        plan = build_warp_plan(img, img.salient_box, SQ_CELL, fitted)
        assert plan.mode == WARP
        edges = {}
        for k, tri in enumerate(plan.triangles):
            for a, b in ((0, 1), (1, 2), (0, 2)):
                key = tuple(sorted((tri[a], tri[b])))
                edges.setdefault(key, []).append(k)
        shared = {k: v for k, v in edges.items() if len(v) == 2}
        assert shared
        for (va, vb), (t1, t2) in shared.items():
            pts = np.linspace(plan.src_points[va], plan.src_points[vb], 10)
            out1 = _apply_affine(plan.affines[t1], pts)
            out2 = _apply_affine(plan.affines[t2], pts)
            assert np.abs(out1 - out2).max() < 1e-6

    def test_crop_plan_is_rigid(self):
        img = image_record("a", 1000, 1000, box=(500, 500, 60, 60))
        fitted = RectSpec(25, 25, 12, 12)
        plan = build_warp_plan(img, img.salient_box, SQ_CELL, fitted)
        assert plan.mode == CROP
        m = plan.box_affine
        assert m[0, 1] == 0.0 and m[1, 0] == 0.0  # no shear
        assert m[0, 0] == pytest.approx(m[1, 1])  # uniform scale


class TestApplyWarp:
    def test_identity_round_trip(self):
        rng = np.random.default_rng(0)
        src = rng.integers(0, 256, size=(30, 30, 3)).astype(np.float32)
        img = image_record("a", 30, 30, box=(15, 15, 10, 10))
        cell = ConvexPolygon([(0, 0), (30, 0), (30, 30), (0, 30)])
        fitted = RectSpec(15, 15, 10, 10)
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        canvas = np.zeros((30, 30, 3), dtype=np.float32)
        mask = apply_warp(src, plan, cell, canvas)
        assert mask.all()
        assert np.abs(canvas - src).max() <= 1.0

    def test_checkerboard_pure_scale(self):
        # 20x20 checker with 4-px squares, cropped at 2x scale into a cell
        src = np.zeros((20, 20, 3), dtype=np.float32)
        for r in range(20):
            for c in range(20):
                if (r // 4 + c // 4) % 2 == 0:
                    src[r, c] = 255.0
        img = image_record("a", 20, 20, box=(10, 10, 10, 10))
        cell = ConvexPolygon([(0, 0), (40, 0), (40, 40), (0, 40)])
        fitted = RectSpec(20, 20, 20, 20)  # scale 2, no translation
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        assert plan.mode == CROP
        canvas = np.zeros((40, 40, 3), dtype=np.float32)
        apply_warp(src, plan, cell, canvas)
        # oracle: independent nearest-neighbor render of the scaled checker,
        # compared off the (blurred) checker edges
        for r in range(40):
            for c in range(40):
                sx, sy = (c + 0.5) / 2.0, (r + 0.5) / 2.0
                dx = min(sx % 4, 4 - sx % 4)
                dy = min(sy % 4, 4 - sy % 4)
                if dx > 0.75 and dy > 0.75:
                    want = 255.0 if (int(sy // 4) + int(sx // 4)) % 2 == 0 else 0.0
                    assert abs(canvas[r, c, 0] - want) <= 1.0, (r, c)

    def test_nothing_painted_outside_mask(self):
        src = np.full((10, 10, 3), 200, dtype=np.float32)
        img = image_record("a", 10, 10, box=(5, 5, 6, 6))
        cell = ConvexPolygon([(8, 8), (20, 8), (20, 20), (8, 20)])
        fitted = RectSpec(14, 14, 6, 6)
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        canvas = np.zeros((32, 32, 3), dtype=np.float32)
        mask = apply_warp(src, plan, cell, canvas)
        outside = ~mask
        assert canvas[outside].max() == 0.0

    def test_warp_covers_every_cell_pixel(self):
        rng = np.random.default_rng(1)
        src = rng.integers(1, 255, size=(24, 36, 3)).astype(np.float32)
        img = image_record("a", 36, 24, box=(18, 12, 12, 8))
        cell = ConvexPolygon([(2, 2), (30, 4), (28, 26), (4, 24)])
        fitted = RectSpec(16, 14, 9, 6)
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        assert plan.mode == WARP
        canvas = np.zeros((32, 32, 3), dtype=np.float32)
        mask = apply_warp(src, plan, cell, canvas)
        rr, cc = np.nonzero(mask)
        assert (canvas[rr, cc].sum(axis=1) > 0).all()  # no holes


class TestAssignPixels:
    def test_partition_disjoint_and_complete(self):
        shape = build_shape_model(shapes.rectangle(2, 1), resolution=128)
        left = ConvexPolygon([(0, 0), (64, 0), (64, 64), (0, 64)])
        right = ConvexPolygon([(64, 0), (128, 0), (128, 64), (64, 64)])
        img = image_record("a", 10, 10)
        cells = []
        for poly in (left, right):
            fitted = RectSpec(*poly.vertices.mean(axis=0), 10, 10)
            plan = build_warp_plan(img, img.salient_box, poly, fitted)
            cells.append(LayoutCell(polygon=poly, image=img, fitted=fitted, cover=cover_rect(poly), plan=plan))
        owner = assign_pixels(cells, shape.mask)
        assert ((owner >= 0) == shape.mask).all()
        assert set(np.unique(owner[shape.mask])) == {0, 1}


class TestRender:
    def _cells_for(self, shape, polys, records):
        from shapecollage.optimize import fit_box

        cells = []
        for poly, rec in zip(polys, records):
            fb = fit_box(poly, rec)
            plan = build_warp_plan(rec, rec.salient_box, poly, fb.rect)
            cells.append(
                LayoutCell(polygon=poly, image=rec, fitted=fb.rect, cover=cover_rect(poly), plan=plan)
            )
        return cells

    def test_single_cell_coverage_and_masking(self):
        shape = build_shape_model(shapes.disk(n=720), resolution=128)
        poly = ConvexPolygon([(24, 24), (104, 24), (104, 104), (24, 104)])
        rec = image_record("a", 300, 300, box=(150, 150, 100, 100))
        cells = self._cells_for(shape, [poly], [rec])
        rng = np.random.default_rng(3)
        arrays = {"a": rng.integers(0, 256, size=(300, 300, 3)).astype(np.float32)}
        canvas, painted, salient, owner = render(cells, shape, image_arrays=arrays)
        assert canvas.shape == (*shape.mask.shape, 3)
        assert (painted[0] == shape.mask).all()
        assert salient[0].sum() > 0
        assert (salient[0] & ~painted[0]).sum() == 0

    def test_disjoint_masks_tile_shape(self):
        shape = build_shape_model(shapes.rectangle(2, 1), resolution=128)
        half = ConvexPolygon([(0, 0), (64, 0), (64, 64), (0, 64)])
        other = ConvexPolygon([(64, 0), (128, 0), (128, 64), (64, 64)])
        recs = [image_record("a", 200, 200), image_record("b", 200, 100)]
        cells = self._cells_for(shape, [half, other], recs)
        rng = np.random.default_rng(5)
        arrays = {
            "a": rng.integers(0, 256, size=(200, 200, 3)).astype(np.float32),
            "b": rng.integers(0, 256, size=(100, 200, 3)).astype(np.float32),
        }
        canvas, painted, salient, owner = render(cells, shape, image_arrays=arrays)
        assert (painted[0] & painted[1]).sum() == 0
        union = painted[0] | painted[1]
        assert (union == shape.mask).all()

    def test_deterministic(self):
        shape = build_shape_model(shapes.rectangle(1, 1), resolution=128)
        poly = ConvexPolygon([(0, 0), (128, 0), (128, 128), (0, 128)])
        rec = image_record("a", 64, 64, box=(32, 32, 40, 40))
        cells = self._cells_for(shape, [poly], [rec])
        rng = np.random.default_rng(7)
        arrays = {"a": rng.integers(0, 256, size=(64, 64, 3)).astype(np.float32)}
        c1, _, _, _ = render(cells, shape, image_arrays=arrays)
        c2, _, _, _ = render(cells, shape, image_arrays=arrays)
        assert np.array_equal(c1, c2)


class TestRasterizeConvex:
    def test_matches_area(self):
        poly = ConvexPolygon([(2, 2), (12, 2), (12, 10), (2, 10)])
        mask = rasterize_convex(poly, 16, 16)
        assert mask.sum() == 80

    def test_source_coords_box_region(self):
        img = image_record("a", 40, 40, box=(20, 20, 20, 20))
        cell = ConvexPolygon([(0, 0), (40, 0), (40, 40), (0, 40)])
        fitted = RectSpec(20, 20, 20, 20)
        plan = build_warp_plan(img, img.salient_box, cell, fitted)
        xs = np.array([20.0])
        ys = np.array([20.0])
        src = source_coords(plan, xs, ys)
        assert np.allclose(src, [[20.0, 20.0]])
