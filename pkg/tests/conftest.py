import json
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))


def pytest_runtest_logreport(report):
    """Print one PASS/FAIL line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {status}")


IMAGE_SIZES = [
    (200, 150), (150, 200), (240, 120), (120, 240), (180, 180), (300, 100),
    (100, 300), (160, 90), (220, 140), (140, 220), (128, 128), (320, 200),
    (200, 320), (256, 144), (144, 256), (192, 192), (280, 160), (160, 280),
    (210, 140), (140, 210), (176, 176), (260, 130), (130, 260), (230, 230),
]
CATEGORIES = ["sky", "cats", "urban", None]


def synth_image(path, w, h, seed):
    rng = np.random.default_rng(seed)
    base = rng.integers(30, 220, size=3)
    arr = np.tile(base, (h, w, 1)).astype(np.int16)
    noise = rng.integers(-25, 25, size=(h, w, 3))
    arr = np.clip(arr + noise, 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path)


def salient_box_for(w, h, seed):
    rng = np.random.default_rng(seed + 999)
    bw = int(w * rng.uniform(0.3, 0.6))
    bh = int(h * rng.uniform(0.3, 0.6))
    x1 = int(rng.uniform(0.05, 0.9) * (w - bw))
    y1 = int(rng.uniform(0.05, 0.9) * (h - bh))
    return [x1, y1, x1 + bw, y1 + bh]


@pytest.fixture(scope="session")
def image_library(tmp_path_factory):
    """Synthetic image files plus ready manifest entries."""
    root = tmp_path_factory.mktemp("images")
    entries = []
    for i, (w, h) in enumerate(IMAGE_SIZES):
        name = f"img{i:02d}.png"
        synth_image(root / name, w, h, seed=i)
        entries.append(
            {
                "path": name,
                "salient_box": salient_box_for(w, h, seed=i),
                "category": CATEGORIES[i % len(CATEGORIES)],
                "importance": round(1.0 - i / len(IMAGE_SIZES), 3),
            }
        )
    return {"dir": root, "entries": entries}


@pytest.fixture(scope="session")
def make_manifest(image_library):
    """Factory: write a manifest with the first n images into a directory."""

    def _make(directory, n, name="manifest.json", **overrides):
        entries = []
        for e in image_library["entries"][:n]:
            entry = dict(e)
            entry["path"] = str(image_library["dir"] / e["path"])
            entry.update(overrides)
            entries.append(entry)
        path = Path(directory) / name
        path.write_text(json.dumps({"images": entries}, indent=1))
        return path

    return _make


@pytest.fixture(scope="session")
def shape_files(tmp_path_factory):
    """Corpus shapes written as polygon files."""
    import shapes as corpus_shapes
    from shapecollage.shape import write_polygon_file

    root = tmp_path_factory.mktemp("shapes")
    paths = {}
    for name, rings in corpus_shapes.corpus().items():
        p = root / f"{name}.txt"
        write_polygon_file(rings, p)
        paths[name] = p
    return paths
