"""Object ground truth, polygon rasterization and the prior contour mask."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .imagecore import as_mask, l0_norm

_EPS = 1e-9


@dataclass(frozen=True)
class GroundTruth:
    """One annotated object.

    ``bbox`` is ``(row_min, col_min, row_max, col_max)`` in pixel-center
    coordinates; ``polygons`` are ``(N, 2)`` arrays of ``(row, col)`` vertices.
    """

    bbox: tuple[float, float, float, float]
    polygons: tuple[np.ndarray, ...]
    object_area: int
    canvas: tuple[int, int]
    category: str = "object"
    ann_id: int = 0

    @classmethod
    def from_polygons(cls, polygons, canvas, category="object", ann_id=0):
        polys = tuple(np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in polygons)
        if not polys:
            raise ValueError("at least one polygon is required")
        pts = np.concatenate(polys)
        bbox = (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))
        h, w = canvas
        area = l0_norm(rasterize_polygon(polys, h, w))
        return cls(bbox, polys, area, (int(h), int(w)), category, ann_id)

    @cached_property
    def segmentation(self) -> np.ndarray:
        return rasterize_polygon(self.polygons, *self.canvas)

    @property
    def center(self) -> tuple[float, float]:
        r0, c0, r1, c1 = self.bbox
        return (r0 + r1) / 2.0, (c0 + c1) / 2.0


@dataclass(frozen=True)
class PriorContour:
    mask: np.ndarray = field(repr=False)


def rasterize_polygon(polygons, h: int, w: int) -> np.ndarray:
    """Fill polygons with the even-odd rule, sampling pixel centers.

    Centers lying exactly on an edge count as inside, so the result is the
    closed polygon region intersected with the integer grid. Parts outside
    the canvas are simply not drawn.
    """
    if isinstance(polygons, np.ndarray) and polygons.ndim == 2:
        polygons = [polygons]
    inside = np.zeros((h, w), dtype=bool)
    edge = np.zeros((h, w), dtype=bool)
    for poly in polygons:
        poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
        if len(poly) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(poly)}")
        parity = _scanline_fill(poly, h, w)
        inside ^= parity
        edge |= _edge_pixels(poly, h, w)
    return (inside | edge).astype(np.uint8)


def _scanline_fill(poly: np.ndarray, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=bool)
    r0, c0 = poly[:, 0], poly[:, 1]
    r1, c1 = np.roll(r0, -1), np.roll(c0, -1)
    lo = max(0, math.ceil(poly[:, 0].min()))
    hi = min(h - 1, math.floor(poly[:, 0].max()))
    for row in range(lo, hi + 1):
        # half-open in row so shared vertices are counted once
        crosses = ((r0 <= row) & (r1 > row)) | ((r1 <= row) & (r0 > row))
        if not crosses.any():
            continue
        t = (row - r0[crosses]) / (r1[crosses] - r0[crosses])
        xs = np.sort(c0[crosses] + t * (c1[crosses] - c0[crosses]))
        for a, b in zip(xs[0::2], xs[1::2]):
            start = max(0, math.ceil(a - _EPS))
            stop = min(w - 1, math.floor(b + _EPS))
            if start <= stop:
                out[row, start:stop + 1] ^= True
    return out


def _edge_pixels(poly: np.ndarray, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=bool)
    n = len(poly)
    for i in range(n):
        (ra, ca), (rb, cb) = poly[i], poly[(i + 1) % n]
        if abs(ra - rb) < _EPS:
            row = round(ra)
            if abs(row - ra) < _EPS and 0 <= row < h:
                start = max(0, math.ceil(min(ca, cb) - _EPS))
                stop = min(w - 1, math.floor(max(ca, cb) + _EPS))
                if start <= stop:
                    out[row, start:stop + 1] = True
            continue
        lo = max(0, math.ceil(min(ra, rb) - _EPS))
        hi = min(h - 1, math.floor(max(ra, rb) + _EPS))
        for row in range(lo, hi + 1):
            col = ca + (row - ra) / (rb - ra) * (cb - ca)
            c = round(col)
            if abs(c - col) < 1e-7 and 0 <= c < w:
                out[row, c] = True
    return out


def extract_boundary(seg) -> PriorContour:
    """Inner 4-connected boundary; the canvas border counts as outside."""
    seg = as_mask(seg).astype(bool)
    if not seg.any():
        raise ValueError("segmentation is empty")
    padded = np.pad(seg, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return PriorContour((seg & ~interior).astype(np.uint8))


def budget_pixels(gt: GroundTruth, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"budget fraction must be in (0, 1], got {fraction}")
    # guard against 0.035 * 1000 landing on 34.999...
    return max(1, math.floor(fraction * gt.object_area + 1e-9))


def stride_select(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` items spread evenly over ``range(n)`` with a random phase."""
    if k >= n:
        return np.arange(n)
    step = n / k
    offset = rng.uniform(0.0, step)
    return np.floor(offset + step * np.arange(k)).astype(np.int64)


def dilate4(m: np.ndarray) -> np.ndarray:
    m = m.astype(bool)
    out = m.copy()
    out[1:, :] |= m[:-1, :]
    out[:-1, :] |= m[1:, :]
    out[:, 1:] |= m[:, :-1]
    out[:, :-1] |= m[:, 1:]
    return out


def fit_budget(m, budget: int, seed=0, region=None) -> np.ndarray:
    """Bring a mask to at most ``budget`` pixels.

    Oversized masks are thinned by stride selection over the row-major pixel
    order. Undersized masks are grown by 4-neighbour dilation inside
    ``region`` (when given); the original pixels are always kept and only
    the added ring pixels get thinned.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    m = as_mask(m)
    rng = np.random.default_rng(seed)
    n = int(m.sum())
    if n > budget:
        rows, cols = np.nonzero(m)
        keep = stride_select(n, budget, rng)
        out = np.zeros_like(m)
        out[rows[keep], cols[keep]] = 1
        return out
    if n == budget or region is None or n == 0:
        return m.copy()
    region = as_mask(region).astype(bool)
    grown = m.astype(bool)
    while grown.sum() < budget:
        nxt = dilate4(grown) & region
        if nxt.sum() == grown.sum():
            break
        grown = nxt | grown
    added = grown & ~m.astype(bool)
    rows, cols = np.nonzero(added)
    keep = stride_select(len(rows), budget - n, rng)
    out = m.copy()
    out[rows[keep], cols[keep]] = 1
    return out


def prior_contour(gt: GroundTruth, budget: int, seed=0) -> np.ndarray:
    """Budget-fitted boundary of the object's filled segmentation."""
    seg = gt.segmentation
    return fit_budget(extract_boundary(seg).mask, budget, seed=seed, region=seg)


# -- COCO-style annotations ---------------------------------------------------

def gt_from_coco(ann: dict, height: int, width: int, category: str | None = None) -> GroundTruth:
    """Build a GroundTruth from one COCO annotation (``[x, y, ...]`` vertex order)."""
    polys = []
    for flat in ann["segmentation"]:
        xy = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
        polys.append(xy[:, ::-1])
    gt = GroundTruth.from_polygons(polys, (height, width),
                                   category or str(ann.get("category_id", "object")),
                                   int(ann.get("id", 0)))
    if "bbox" in ann:
        x, y, bw, bh = (float(v) for v in ann["bbox"])
        bbox = (y, x, y + bh, x + bw)
        # keep the invariant that the box covers every vertex
        pts = np.concatenate(gt.polygons)
        bbox = (min(bbox[0], pts[:, 0].min()), min(bbox[1], pts[:, 1].min()),
                max(bbox[2], pts[:, 0].max()), max(bbox[3], pts[:, 1].max()))
        gt = GroundTruth(tuple(float(v) for v in bbox), gt.polygons, gt.object_area,
                         gt.canvas, gt.category, gt.ann_id)
    return gt


def gt_to_coco(gt: GroundTruth, image_id: int, category_id: int = 1) -> dict:
    r0, c0, r1, c1 = gt.bbox
    return {
        "id": gt.ann_id,
        "image_id": image_id,
        "category_id": category_id,
        "bbox": [c0, r0, c1 - c0, r1 - r0],
        "segmentation": [p[:, ::-1].ravel().tolist() for p in gt.polygons],
        "area": gt.object_area,
        "iscrowd": 0,
    }
