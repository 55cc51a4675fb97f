"""Hand-designed comparison patterns, each a budget-capped mask over one object.

All generators are deterministic and never emit more than ``budget`` pixels.
Box-based patterns stay inside the object's bbox (clipped to the canvas);
``strip`` stays inside the segmentation.
"""
from __future__ import annotations

import math

import numpy as np

from .contour import GroundTruth, stride_select
from .imagecore import as_mask

PATTERN_NAMES = ("advpatch", "fourpatch", "grid2x2", "smallgrid", "strip", "fasc", "oasc")
FIXED_PATTERNS = PATTERN_NAMES[:5]

# stride pruning inside generators uses a fixed phase so outputs stay deterministic
_PRUNE_SEED = 0


def _check_budget(budget, minimum=1):
    if budget < minimum:
        raise ValueError(f"budget must be >= {minimum}, got {budget}")


def bbox_region(gt: GroundTruth) -> np.ndarray:
    """Pixels whose centers fall inside the closed bbox, clipped to the canvas."""
    h, w = gt.canvas
    r0, c0, r1, c1 = gt.bbox
    out = np.zeros((h, w), dtype=bool)
    rs, re = max(0, math.ceil(r0 - 1e-9)), min(h - 1, math.floor(r1 + 1e-9))
    cs, ce = max(0, math.ceil(c0 - 1e-9)), min(w - 1, math.floor(c1 + 1e-9))
    if rs <= re and cs <= ce:
        out[rs:re + 1, cs:ce + 1] = True
    return out


def _square(shape, center, side):
    """Boolean ``side x side`` block whose middle sits on ``center``."""
    out = np.zeros(shape, dtype=bool)
    r = math.floor(center[0] - side / 2 + 0.5)
    c = math.floor(center[1] - side / 2 + 0.5)
    out[max(0, r):max(0, r + side), max(0, c):max(0, c + side)] = True
    return out


def _nearest_pixel(region: np.ndarray, point) -> tuple[int, int]:
    rows, cols = np.nonzero(region)
    d = (rows - point[0]) ** 2 + (cols - point[1]) ** 2
    i = int(np.argmin(d))
    return int(rows[i]), int(cols[i])


def _prune(mask: np.ndarray, budget: int) -> np.ndarray:
    mask = mask.astype(bool)
    rows, cols = np.nonzero(mask)
    if len(rows) <= budget:
        return mask.astype(np.uint8)
    keep = stride_select(len(rows), budget, np.random.default_rng(_PRUNE_SEED))
    out = np.zeros(mask.shape, dtype=np.uint8)
    out[rows[keep], cols[keep]] = 1
    return out


def adv_patch(gt: GroundTruth, budget: int) -> np.ndarray:
    _check_budget(budget)
    side = math.isqrt(budget)
    region = bbox_region(gt)
    if not region.any():
        return np.zeros(gt.canvas, dtype=np.uint8)
    sq = _square(gt.canvas, gt.center, side) & region
    if not sq.any():
        sq[_nearest_pixel(region, gt.center)] = True
    return sq.astype(np.uint8)


def _quadrant_centers(gt: GroundTruth):
    r0, c0, r1, c1 = gt.bbox
    cr, cc = gt.center
    dr, dc = (r1 - r0) / 4.0, (c1 - c0) / 4.0
    return [(cr - dr, cc - dc), (cr - dr, cc + dc), (cr + dr, cc - dc), (cr + dr, cc + dc)]


def four_patch(gt: GroundTruth, budget: int) -> np.ndarray:
    _check_budget(budget, 4)
    side = math.isqrt(budget // 4)
    region = bbox_region(gt)
    out = np.zeros(gt.canvas, dtype=bool)
    for center in _quadrant_centers(gt):
        out |= _square(gt.canvas, center, side)
    return _prune(out & region, budget)


def _lattice(gt: GroundTruth, thickness: int) -> np.ndarray:
    region = bbox_region(gt)
    out = np.zeros(gt.canvas, dtype=bool)
    if not region.any():
        return out
    rows = np.nonzero(region.any(axis=1))[0]
    cols = np.nonzero(region.any(axis=0))[0]

    def bands(lo, hi):
        # borders grow inward, the midline grows symmetrically
        mid = math.floor((lo + hi) / 2 - thickness / 2 + 0.5)
        return [(lo, lo + thickness), (mid, mid + thickness), (hi - thickness + 1, hi + 1)]

    for a, b in bands(rows[0], rows[-1]):
        out[max(a, rows[0]):min(b, rows[-1] + 1), :] = True
    for a, b in bands(cols[0], cols[-1]):
        out[:, max(a, cols[0]):min(b, cols[-1] + 1)] = True
    return out & region


def _thickest(build, budget: int) -> tuple[np.ndarray, int]:
    """Largest thickness whose mask fits the budget; thickness 0 means pruned."""
    best = build(1)
    if best.sum() > budget:
        return _prune(best, budget), 0
    t = 1
    while True:
        nxt = build(t + 1)
        if nxt.sum() > budget or nxt.sum() == best.sum():
            return best.astype(np.uint8), t
        best, t = nxt, t + 1


def grid_2x2(gt: GroundTruth, budget: int) -> np.ndarray:
    _check_budget(budget)
    return _thickest(lambda t: _lattice(gt, t), budget)[0]


def grid_thickness(gt: GroundTruth, budget: int) -> int:
    return _thickest(lambda t: _lattice(gt, t), budget)[1]


def small_grid(gt: GroundTruth, budget: int) -> np.ndarray:
    _check_budget(budget)
    region = bbox_region(gt)
    if budget < 4:
        out = np.zeros(gt.canvas, dtype=np.uint8)
        if region.any():
            out[_nearest_pixel(region, gt.center)] = 1
        return out
    k = math.isqrt(budget // 4)
    r0, c0, r1, c1 = gt.bbox
    out = np.zeros(gt.canvas, dtype=bool)
    for i in range(k):
        for j in range(k):
            center = (r0 + (i + 0.5) * (r1 - r0) / k, c0 + (j + 0.5) * (c1 - c0) / k)
            out |= _square(gt.canvas, center, 2)
    return (out & region).astype(np.uint8)


def _cross(seg: np.ndarray, anchor, thickness: int) -> np.ndarray:
    out = np.zeros(seg.shape, dtype=bool)
    r, c = anchor
    offsets = [0]
    for d in range(1, thickness):
        # alternate below/above (right/left) of the centre line
        offsets.append((d + 1) // 2 if d % 2 else -(d // 2))
    h, w = seg.shape
    for off in offsets:
        if 0 <= r + off < h:
            out[r + off, :] = True
        if 0 <= c + off < w:
            out[:, c + off] = True
    return out & seg


def strip(gt: GroundTruth, seg, budget: int) -> np.ndarray:
    """Horizontal and vertical chords through the segmentation centroid."""
    _check_budget(budget)
    seg = as_mask(seg).astype(bool)
    if not seg.any():
        raise ValueError("segmentation is empty")
    rows, cols = np.nonzero(seg)
    centroid = (rows.mean(), cols.mean())
    anchor = _nearest_pixel(seg, centroid)
    return _thickest(lambda t: _cross(seg, anchor, t), budget)[0]


def make_pattern_mask(name: str, gt: GroundTruth, budget: int) -> np.ndarray:
    if name == "advpatch":
        return adv_patch(gt, budget)
    if name == "fourpatch":
        # four squares need at least 4 pixels; tiny objects fall back to one square
        return four_patch(gt, budget) if budget >= 4 else adv_patch(gt, budget)
    if name == "grid2x2":
        return grid_2x2(gt, budget)
    if name == "smallgrid":
        return small_grid(gt, budget)
    if name == "strip":
        return strip(gt, gt.segmentation, budget)
    raise ValueError(f"unknown fixed pattern {name!r}; expected one of {FIXED_PATTERNS}")
