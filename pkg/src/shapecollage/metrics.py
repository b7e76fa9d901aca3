"""Evaluation metrics computed from the collage's per-image masks.

Saliency masks are pixel masks when the manifest supplies them, otherwise
the rasterized fitted-box regions; image locations for the correlation
metric are painted-region centroids, normalized by the canvas dimensions.
Both conventions are recorded in the report header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class MetricReport:
    m_a: float
    m_c: float
    m_o: float
    m_n: float | None  # None when no image has a category
    m_s: float
    shape_pixels: int
    per_image: dict
    notes: dict

    def as_dict(self) -> dict:
        return {
            "m_a": self.m_a,
            "m_c": self.m_c,
            "m_o": self.m_o,
            "m_n": self.m_n,
            "m_s": self.m_s,
            "shape_pixels": self.shape_pixels,
            "per_image": self.per_image,
            "notes": self.notes,
        }


def saliency_area(salient_masks: list, shape_mask: np.ndarray) -> float:
    """Fraction of the shape covered by visible salient regions."""
    p_x = int(shape_mask.sum())
    if p_x == 0:
        return 0.0
    union = np.zeros_like(shape_mask)
    for m in salient_masks:
        union |= m
    return float((union & shape_mask).sum() / p_x)


def compactness(painted_masks: list, shape_mask: np.ndarray) -> float:
    """White-space fraction: shape pixels painted by no image."""
    p_x = int(shape_mask.sum())
    if p_x == 0:
        return 0.0
    union = np.zeros_like(shape_mask)
    for m in painted_masks:
        union |= m
    p_w = int((shape_mask & ~union).sum())
    return float(p_w / p_x)


def overlap(painted_masks: list, shape_mask: np.ndarray) -> float:
    """Summed pairwise intersection, relative to the shape area."""
    p_x = int(shape_mask.sum())
    if p_x == 0:
        return 0.0
    p_o = 0
    for i in range(len(painted_masks)):
        for j in range(i + 1, len(painted_masks)):
            p_o += int((painted_masks[i] & painted_masks[j]).sum())
    return float(p_o / p_x)


def correlation(categories: dict, locations: dict, shape_dims) -> float | None:
    """Mean distance from each categorized image to its category centroid,
    in canvas-normalized coordinates. None when nothing is categorized."""
    w, h = shape_dims
    normalized = {}
    for rid, cat in categories.items():
        if cat is None or rid not in locations:
            continue
        x, y = locations[rid]
        normalized.setdefault(cat, []).append((rid, x / w, y / h))
    if not normalized:
        return None
    dists = []
    for cat, rows in normalized.items():
        cx = sum(r[1] for r in rows) / len(rows)
        cy = sum(r[2] for r in rows) / len(rows)
        for rid, x, y in rows:
            dists.append(float(np.hypot(x - cx, y - cy)))
    return float(np.mean(dists))


def saliency_loss(salient_masks: list) -> float:
    """1 - |union| / sum of per-image visible salient areas."""
    total = sum(int(m.sum()) for m in salient_masks)
    if total == 0:
        return 0.0
    union = np.zeros_like(salient_masks[0])
    for m in salient_masks:
        union |= m
    return float(1.0 - union.sum() / total)


def compute_report(
    painted_masks: list,
    salient_masks: list,
    shape_mask: np.ndarray,
    image_ids: list,
    categories: dict,
    mask_based_saliency: bool,
) -> MetricReport:
    locations = {}
    per_image = {}
    for rid, pm, sm in zip(image_ids, painted_masks, salient_masks):
        rr, cc = np.nonzero(pm)
        if rr.size:
            locations[rid] = (float(cc.mean() + 0.5), float(rr.mean() + 0.5))
        per_image[rid] = {
            "painted_px": int(pm.sum()),
            "salient_px": int(sm.sum()),
        }
    h, w = shape_mask.shape
    return MetricReport(
        m_a=saliency_area(salient_masks, shape_mask),
        m_c=compactness(painted_masks, shape_mask),
        m_o=overlap(painted_masks, shape_mask),
        m_n=correlation(categories, locations, (w, h)),
        m_s=saliency_loss(salient_masks),
        shape_pixels=int(shape_mask.sum()),
        per_image=per_image,
        notes={
            "saliency_source": "pixel masks" if mask_based_saliency else "rasterized salient boxes",
            "image_location": "painted-region centroid, normalized by canvas width/height",
        },
    )


def write_report(report: MetricReport, txt_path, json_path) -> None:
    lines = [f"# {k}: {v}" for k, v in report.notes.items()]
    for key in ("m_a", "m_c", "m_o", "m_n", "m_s"):
        value = getattr(report, key)
        lines.append(f"{key} = {'n/a' if value is None else repr(value)}")
    lines.append(f"shape_pixels = {report.shape_pixels}")
    Path(txt_path).write_text("\n".join(lines) + "\n")
    Path(json_path).write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
