"""Image manifest ingestion and importance ranking.

The manifest is a JSON file: {"images": [{"path": ..., "salient_box":
[x1, y1, x2, y2], "importance": 0.7, "designated": false, "category": "cat",
"saliency_mask": "mask.png"}, ...]} (a bare list also works). Boxes are in
image pixel coordinates; a missing box means the full frame is salient.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import InvalidManifest
from .geometry import RectSpec


@dataclass
class ImageRecord:
    id: str
    path: str
    width: int
    height: int
    salient_box: RectSpec  # image pixel coordinates
    importance: float | None = None
    designated: bool = False
    category: str | None = None
    saliency_mask: str | None = None
    rank: int | None = None  # 1 = most important

    @property
    def aspect(self) -> float:
        return self.salient_box.aspect


def _box_from_corners(x1, y1, x2, y2, width, height) -> RectSpec:
    x1, x2 = sorted((float(x1), float(x2)))
    y1, y2 = sorted((float(y1), float(y2)))
    x1, x2 = max(0.0, x1), min(float(width), x2)
    y1, y2 = max(0.0, y1), min(float(height), y2)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        raise InvalidManifest(f"salient box [{x1},{y1},{x2},{y2}] is empty")
    return RectSpec(0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1)


def load_manifest(path) -> list:
    """Parse the manifest and probe each image's dimensions."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidManifest(f"cannot read manifest {path}: {exc}") from exc
    entries = data.get("images") if isinstance(data, dict) else data
    if not isinstance(entries, list) or not entries:
        raise InvalidManifest(f"manifest {path} has no image entries")
    records = []
    seen = set()
    for i, entry in enumerate(entries):
        img_path = entry.get("path")
        if not img_path:
            raise InvalidManifest(f"entry {i} has no path")
        resolved = Path(img_path)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        try:
            with Image.open(resolved) as img:
                width, height = img.size
        except Exception as exc:
            warnings.warn(f"skipping unreadable image {resolved}: {exc}", stacklevel=2)
            continue
        rid = str(entry.get("id", Path(img_path).stem))
        if rid in seen:
            raise InvalidManifest(f"duplicate image id {rid!r}")
        seen.add(rid)
        box = entry.get("salient_box")
        if box is not None:
            rect = _box_from_corners(*box, width, height)
        else:
            rect = RectSpec(width / 2.0, height / 2.0, float(width), float(height))
        mask_path = entry.get("saliency_mask")
        if mask_path is not None:
            mp = Path(mask_path)
            mask_path = str(mp if mp.is_absolute() else path.parent / mp)
        records.append(
            ImageRecord(
                id=rid,
                path=str(resolved),
                width=width,
                height=height,
                salient_box=rect,
                importance=entry.get("importance"),
                designated=bool(entry.get("designated", False)),
                category=entry.get("category"),
                saliency_mask=mask_path,
            )
        )
    if not records:
        raise InvalidManifest(f"manifest {path} has no readable images")
    return records


def rank_images(records: list) -> list:
    """Assign importance ranks 1..N: user-designated images first (manifest
    order), then explicit importance scores descending, then the rest in
    manifest order."""
    designated = [r for r in records if r.designated]
    scored = [r for r in records if not r.designated and r.importance is not None]
    scored.sort(key=lambda r: -r.importance)
    rest = [r for r in records if not r.designated and r.importance is None]
    ordered = designated + scored + rest
    for rank, rec in enumerate(ordered, start=1):
        rec.rank = rank
    return ordered
