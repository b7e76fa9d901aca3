"""End-to-end orchestration: shape + manifest + config in, layout file,
rendered collage, and metric report out. All artifacts are written
atomically; a failed run removes whatever it had created."""

from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import compositor, metrics
from .decompose import decompose, merge_small_patches
from .errors import CollageError, PreconditionViolated
from .manifest import load_manifest, rank_images
from .medial import medial_axis, shape_center
from .optimize import optimize_all, patch_prominence
from .shape import build_shape_model, save_mask, write_polygon_file
from .tree import DirectionField, PatchTree, allocate_leaf_budgets, grow_tree, tree_to_text


@dataclass
class RunConfig:
    resolution: int = 1024
    tau_p: float = 0.75
    tau_e: int = 3
    mode: str = "balanced"  # balanced | unbalanced
    unbalanced_prob: float = 0.7
    triangle_penalty: float = 0.8
    seed: int = 0
    brute_force: bool = False
    background: tuple = (255, 255, 255)
    debug_axis: bool = False
    debug_masks: bool = False

    def validate(self) -> None:
        if not 0.0 < self.tau_p <= 1.0:
            raise PreconditionViolated(f"tau_p {self.tau_p} outside (0, 1]")
        if not 0.5 <= self.unbalanced_prob <= 0.95:
            raise PreconditionViolated(
                f"unbalanced_prob {self.unbalanced_prob} outside [0.5, 0.95]"
            )
        if self.unbalanced_prob > 0.9:
            warnings.warn("unbalanced_prob above 0.9 tends to produce unusably small cells")
        if self.mode not in ("balanced", "unbalanced"):
            raise PreconditionViolated(f"unknown mode {self.mode!r}")
        if self.tau_e < 0:
            raise PreconditionViolated("tau_e must be >= 0")


@dataclass
class RunResult:
    layout: dict
    report: metrics.MetricReport | None
    timings: dict
    artifacts: list
    cells: list = field(default_factory=list, repr=False)


def _patch_seed(seed: int, patch_id: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + (patch_id + 1) * 0xBF58476D1CE4E5B9) % (2**63)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_save_image(path: Path, image: Image.Image) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    image.save(tmp, format="PNG")
    os.replace(tmp, path)


def compute_layout(shape_path, manifest_path, config: RunConfig):
    """Run every geometric stage; returns (shape, cells, layout dict,
    records, timings)."""
    config.validate()
    timings = {}

    t0 = time.perf_counter()
    shape = build_shape_model(shape_path, config.resolution)
    interior = medial_axis(shape, "interior")
    exterior = medial_axis(shape, "exterior")
    patches = decompose(shape, config.tau_p, interior_axis=interior, exterior_axis=exterior)
    timings["decompose"] = time.perf_counter() - t0

    records = rank_images(load_manifest(manifest_path))
    n_images = len(records)

    t0 = time.perf_counter()
    if n_images < len(patches):
        patches = merge_small_patches(patches, n_images)
    center = shape_center(shape, interior)
    center_dists = interior.geodesics_from(center) if interior.n_nodes > 1 else None
    for patch in patches:
        patch.prominence = patch_prominence(
            patch, shape, interior, center, center_distances=center_dists
        )
    budgets = allocate_leaf_budgets(patches, n_images)
    field_ctx = DirectionField(shape, interior)
    trees = []
    for patch, budget in zip(patches, budgets):
        root = grow_tree(
            budget, config.mode, seed=_patch_seed(config.seed, patch.id),
            unbalanced_prob=config.unbalanced_prob,
        )
        trees.append(PatchTree(patch=patch, root=root, leaf_budget=budget))
    from .optimize import assign_images

    assign_images(trees, records)
    results = optimize_all(
        trees,
        field_ctx,
        tau_e=config.tau_e,
        brute_force=config.brute_force,
        triangle_penalty=config.triangle_penalty,
    )
    timings["optimize"] = time.perf_counter() - t0

    cells = []
    for result in results:
        for (leaf, polygon), fitted in zip(result.cells, result.fitted):
            rec = leaf.assigned_image
            plan = compositor.build_warp_plan(rec, rec.salient_box, polygon, fitted.rect)
            cells.append(
                compositor.LayoutCell(
                    polygon=polygon,
                    image=rec,
                    fitted=fitted.rect,
                    cover=compositor.cover_rect(polygon),
                    plan=plan,
                )
            )

    layout = {
        "canvas": {"width": shape.width, "height": shape.height},
        "shape": {
            "source": str(shape_path),
            "resolution": config.resolution,
            "scale": shape.scale,
            "offset": [float(shape.offset[0]), float(shape.offset[1])],
        },
        "config": {
            "resolution": config.resolution,
            "tau_p": config.tau_p,
            "tau_e": config.tau_e,
            "mode": config.mode,
            "unbalanced_prob": config.unbalanced_prob,
            "triangle_penalty": config.triangle_penalty,
            "seed": config.seed,
            "brute_force": config.brute_force,
        },
        "patches": [
            {
                "id": tree.patch.id,
                "area_share": tree.patch.area_share,
                "prominence": tree.patch.prominence,
                "leaf_budget": tree.leaf_budget,
                "tree": tree_to_text(tree.root),
                "e_area": result.configuration.e_area,
                "configs_evaluated": result.configuration.evaluated,
            }
            for tree, result in zip(trees, results)
        ],
        "cells": [
            {
                "id": i,
                "image": cell.image.id,
                "mode": cell.plan.mode,
                "polygon": [[float(x), float(y)] for x, y in cell.polygon.vertices],
                "fitted_box": [cell.fitted.cx, cell.fitted.cy, cell.fitted.width, cell.fitted.height],
                "cover": [cell.cover.cx, cell.cover.cy, cell.cover.width, cell.cover.height],
            }
            for i, cell in enumerate(cells)
        ],
        "stats": {
            "e_area": sum(r.configuration.e_area for r in results),
            "configs_evaluated": sum(r.configuration.evaluated for r in results),
            "n_cells": len(cells),
            "n_patches": len(patches),
        },
    }
    return shape, interior, cells, layout, records, timings


def run_pipeline(shape_path, manifest_path, out_dir, config: RunConfig, render: bool = True) -> RunResult:
    """Full run; artifacts land in out_dir (layout.json, collage.png,
    metrics.txt/json, trees.txt, optional debug masks and axis overlay)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        shape, interior, cells, layout, records, timings = compute_layout(
            shape_path, manifest_path, config
        )

        layout_path = out / "layout.json"
        _atomic_write_text(layout_path, json.dumps(layout, indent=2, sort_keys=True) + "\n")
        written.append(layout_path)

        trees_path = out / "trees.txt"
        _atomic_write_text(
            trees_path,
            "\n".join(p["tree"] for p in layout["patches"]) + "\n",
        )
        written.append(trees_path)

        if config.debug_axis:
            axis_path = out / "axis.png"
            _atomic_save_image(axis_path, _axis_overlay(shape, interior))
            written.append(axis_path)

        report = None
        if render:
            t0 = time.perf_counter()
            arrays = {}
            saliency_arrays = {}
            for rec in records:
                arrays[rec.id] = compositor.load_image_rgb(rec.path)
                if rec.saliency_mask:
                    from .shape import load_mask

                    saliency_arrays[rec.id] = load_mask(rec.saliency_mask)
            canvas, painted, salient, owner = compositor.render(
                cells,
                shape,
                background=config.background,
                image_arrays=arrays,
                saliency_arrays=saliency_arrays,
            )
            timings["fill"] = time.perf_counter() - t0

            collage_path = out / "collage.png"
            _atomic_save_image(collage_path, Image.fromarray(canvas))
            written.append(collage_path)

            image_ids = [cell.image.id for cell in cells]
            categories = {rec.id: rec.category for rec in records}
            report = metrics.compute_report(
                painted,
                salient,
                shape.mask,
                image_ids,
                categories,
                mask_based_saliency=bool(saliency_arrays),
            )
            metrics.write_report(report, out / "metrics.txt", out / "metrics.json")
            written.extend([out / "metrics.txt", out / "metrics.json"])

            if config.debug_masks:
                mask_dir = out / "masks"
                mask_dir.mkdir(exist_ok=True)
                save_mask(shape.mask, mask_dir / "shape.png")
                for cid, (cell, pm, sm) in enumerate(zip(cells, painted, salient)):
                    save_mask(pm, mask_dir / f"painted_{cid:03d}_{cell.image.id}.png")
                    save_mask(sm, mask_dir / f"salient_{cid:03d}_{cell.image.id}.png")
                written.append(mask_dir)

        return RunResult(
            layout=layout, report=report, timings=timings, artifacts=[str(p) for p in written],
            cells=cells,
        )
    except Exception:
        for p in written:
            try:
                if Path(p).is_dir():
                    import shutil

                    shutil.rmtree(p)
                else:
                    Path(p).unlink(missing_ok=True)
            except OSError:
                pass
        raise


def _axis_overlay(shape, graph) -> Image.Image:
    img = Image.new("L", (shape.width, shape.height), 255)
    px = np.array(img)
    px[shape.mask] = 200
    img = Image.fromarray(px)
    draw = ImageDraw.Draw(img)
    for chain in graph.chains:
        pts = [tuple(graph.points[n]) for n in chain["nodes"]]
        if len(pts) >= 2:
            draw.line(pts, fill=0, width=1)
    return img


def recompute_metrics(out_dir, manifest_path) -> metrics.MetricReport:
    """`metrics` subcommand: rebuild the report from saved masks."""
    out = Path(out_dir)
    layout = json.loads((out / "layout.json").read_text())
    mask_dir = out / "masks"
    if not mask_dir.is_dir():
        raise CollageError(f"{mask_dir} missing; run with --debug-masks first")
    from .shape import load_mask

    shape_mask = load_mask(mask_dir / "shape.png")
    records = load_manifest(manifest_path)
    categories = {rec.id: rec.category for rec in records}
    painted = []
    salient = []
    image_ids = []
    for cid, cell in enumerate(layout["cells"]):
        rid = cell["image"]
        painted.append(load_mask(mask_dir / f"painted_{cid:03d}_{rid}.png"))
        salient.append(load_mask(mask_dir / f"salient_{cid:03d}_{rid}.png"))
        image_ids.append(rid)
    mask_based = any(rec.saliency_mask for rec in records)
    return metrics.compute_report(
        painted, salient, shape_mask, image_ids, categories, mask_based_saliency=mask_based
    )


def run_decompose(shape_path, out_dir, config: RunConfig) -> dict:
    """`decompose` subcommand: emit patches as a polygon file + overlay."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = build_shape_model(shape_path, config.resolution)
    interior = medial_axis(shape, "interior")
    exterior = medial_axis(shape, "exterior")
    patches = decompose(shape, config.tau_p, interior_axis=interior, exterior_axis=exterior)
    write_polygon_file([p.polygon.vertices for p in patches], out / "patches.txt")
    overlay = Image.new("L", (shape.width, shape.height), 255)
    px = np.array(overlay)
    px[shape.mask] = 220
    overlay = Image.fromarray(px)
    draw = ImageDraw.Draw(overlay)
    for p in patches:
        ring = [tuple(v) for v in p.polygon.vertices] + [tuple(p.polygon.vertices[0])]
        draw.line(ring, fill=0, width=1)
    _atomic_save_image(out / "patches.png", overlay)
    if config.debug_axis:
        _atomic_save_image(out / "axis.png", _axis_overlay(shape, interior))
    return {
        "n_patches": len(patches),
        "area_shares": [p.area_share for p in patches],
        "artifacts": [str(out / "patches.txt"), str(out / "patches.png")],
    }


def timing_report(shape_path, manifests: dict, config: RunConfig, out_dir) -> dict:
    """Per-stage timings across image-collection sizes, with a linear fit
    of the slicing/optimization stage."""
    rows = []
    for n in sorted(manifests):
        result = run_pipeline(shape_path, manifests[n], Path(out_dir) / f"n{n}", config)
        rows.append(
            {
                "n_images": n,
                "decompose_s": result.timings["decompose"],
                "optimize_s": result.timings["optimize"],
                "fill_s": result.timings.get("fill", 0.0),
            }
        )
    xs = np.array([r["n_images"] for r in rows], dtype=float)
    ys = np.array([r["optimize_s"] for r in rows], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dec = np.array([r["decompose_s"] for r in rows])
    dec_slope = float(np.polyfit(xs, dec, 1)[0])
    return {
        "rows": rows,
        "optimize_fit": {"slope": float(slope), "intercept": float(intercept), "r2": r2},
        "decompose_slope": dec_slope,
    }
