"""Synthetic detection scenes: flat-hued shapes over a grey textured background."""
from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..contour import GroundTruth, gt_from_coco, gt_to_coco, rasterize_polygon
from ..imagecore import load_image, save_image

CANVAS = 64
MIN_SIDE, MAX_SIDE = 9, 14
MIN_AREA = 64
SATURATION = (0.7, 1.0)
VALUE = (0.6, 1.0)
KINDS = ("ellipse", "rectangle", "triangle")
ELLIPSE_VERTICES = 32


@dataclass(frozen=True)
class Scene:
    image_id: int
    image: np.ndarray
    objects: tuple[GroundTruth, ...]
    kinds: tuple[str, ...] = ()
    rendered: tuple[np.ndarray, ...] = ()

    @property
    def target(self) -> GroundTruth:
        """The object attacked and scored for this image (always the first)."""
        return self.objects[0]


def _background(rng, size):
    coarse = rng.uniform(0.25, 0.75, (9, 9))
    grid = np.linspace(0, 8, size)
    rows = np.array([np.interp(grid, np.arange(9), row) for row in coarse])
    smooth = np.array([np.interp(grid, np.arange(9), col) for col in rows.T]).T
    tint = 1.0 + rng.normal(0.0, 0.04, 3)
    img = smooth[..., None] * tint + rng.normal(0.0, 0.05, (size, size, 3))
    return np.clip(img, 0.0, 1.0)


def _shape(kind, rng, r0, c0, h, w, size):
    """Polygon ``(n, 2)`` plus the analytically rendered mask of one shape."""
    r1, c1 = r0 + h - 1, c0 + w - 1
    if kind == "rectangle":
        poly = np.array([[r0, c0], [r0, c1], [r1, c1], [r1, c0]], dtype=np.float64)
        return poly, rasterize_polygon(poly, size, size).astype(bool)
    if kind == "triangle":
        cr, cc = (r0 + r1) / 2.0, (c0 + c1) / 2.0
        variants = [
            [[r0, cc], [r1, c1], [r1, c0]],
            [[r1, cc], [r0, c0], [r0, c1]],
            [[cr, c0], [r0, c1], [r1, c1]],
            [[cr, c1], [r1, c0], [r0, c0]],
        ]
        poly = np.array(variants[rng.integers(4)], dtype=np.float64)
        return poly, rasterize_polygon(poly, size, size).astype(bool)
    cr, cc = (r0 + r1) / 2.0, (c0 + c1) / 2.0
    a, b = (h - 1) / 2.0, (w - 1) / 2.0
    t = np.linspace(0.0, 2 * np.pi, ELLIPSE_VERTICES, endpoint=False)
    poly = np.stack([cr + a * np.sin(t), cc + b * np.cos(t)], axis=1)
    rr, cc_ = np.mgrid[0:size, 0:size]
    rendered = ((rr - cr) / a) ** 2 + ((cc_ - cc) / b) ** 2 <= 1.0
    return poly, rendered


def _overlaps(box, boxes, gap=2):
    r0, c0, r1, c1 = box
    return any(r0 <= b[2] + gap and b[0] <= r1 + gap and c0 <= b[3] + gap and b[1] <= c1 + gap
               for b in boxes)


def render_scene(image_id: int, seed: int, size: int = CANVAS) -> Scene:
    rng = np.random.default_rng([seed, image_id])
    img = _background(rng, size)
    n_obj = int(rng.integers(1, 4))
    objects, kinds, placed, masks = [], [], [], []
    for k in range(n_obj):
        for _ in range(100):
            kind = KINDS[rng.integers(len(KINDS))]
            h, w = (int(v) for v in rng.integers(MIN_SIDE, MAX_SIDE + 1, 2))
            r0 = int(rng.integers(1, size - h))
            c0 = int(rng.integers(1, size - w))
            box = (r0, c0, r0 + h - 1, c0 + w - 1)
            if _overlaps(box, placed):
                continue
            poly, rendered = _shape(kind, rng, r0, c0, h, w, size)
            if rendered.sum() < MIN_AREA:
                continue
            break
        else:
            continue
        hue = rng.uniform()
        sat, val = rng.uniform(*SATURATION), rng.uniform(*VALUE)
        color = np.array(colorsys.hsv_to_rgb(hue, sat, val))
        img[rendered] = np.clip(color + rng.normal(0.0, 0.03, (int(rendered.sum()), 3)), 0.0, 1.0)
        placed.append(box)
        kinds.append(kind)
        masks.append(rendered)
        objects.append(GroundTruth.from_polygons([poly], (size, size), "object",
                                                 ann_id=image_id * 10 + k))
    return Scene(image_id, img, tuple(objects), tuple(kinds), tuple(masks))


def gen_scenes(n: int, seed: int, start: int = 0) -> list[Scene]:
    """``n`` scenes with ids ``start .. start+n-1``; each id is rendered independently."""
    return [render_scene(start + i, seed) for i in range(n)]


# -- dataset files ------------------------------------------------------------

def save_dataset(scenes, out_dir) -> Path:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    images, annotations = [], []
    for s in scenes:
        name = f"images/{s.image_id:06d}.png"
        save_image(s.image, out / name)
        h, w = s.image.shape[:2]
        images.append({"id": s.image_id, "height": h, "width": w, "file_name": name})
        annotations.extend(gt_to_coco(gt, s.image_id) for gt in s.objects)
    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }
    path = out / "annotations.json"
    path.write_text(json.dumps(doc, indent=1))
    return path


def load_dataset(path) -> list[Scene]:
    """Read a COCO-style annotation file (or the directory holding ``annotations.json``)."""
    path = Path(path)
    if path.is_dir():
        path = path / "annotations.json"
    doc = json.loads(path.read_text())
    root = path.parent
    by_image: dict[int, list] = {}
    for ann in doc["annotations"]:
        by_image.setdefault(int(ann["image_id"]), []).append(ann)
    scenes = []
    for info in sorted(doc["images"], key=lambda i: int(i["id"])):
        iid = int(info["id"])
        h, w = int(info["height"]), int(info["width"])
        anns = sorted(by_image.get(iid, []), key=lambda a: int(a.get("id", 0)))
        objs = tuple(gt_from_coco(a, h, w, "object") for a in anns)
        img = load_image(root / info["file_name"])
        scenes.append(Scene(iid, img, objs))
    return scenes
