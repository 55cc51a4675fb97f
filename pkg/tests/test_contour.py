import math

import numpy as np
import pytest
import shapely
from hypothesis import given, strategies as st
from shapely.geometry import Polygon

from asc.contour import (
    GroundTruth, budget_pixels, extract_boundary, fit_budget, gt_from_coco, gt_to_coco,
    prior_contour, rasterize_polygon, stride_select,
)
from conftest import rect_gt


def shapely_raster(polys, h, w):
    """Pixel (r, c) is inside iff the closed polygon covers its center."""
    rr, cc = np.mgrid[0:h, 0:w]
    pts = shapely.points(cc.ravel().astype(float), rr.ravel().astype(float))
    out = np.zeros(h * w, bool)
    for p in polys:
        out ^= shapely.covers(Polygon([(c, r) for r, c in p]), pts)
    return out.reshape(h, w)


def _near_edge(poly, h, w, tol=1e-6):
    """Some pixel center sits within ``tol`` of an edge without touching it."""
    rr, cc = np.mgrid[0:h, 0:w]
    pts = shapely.points(cc.ravel().astype(float), rr.ravel().astype(float))
    d = shapely.distance(Polygon([(c, r) for r, c in poly]).exterior, pts)
    return bool(np.any((d > 0) & (d < tol)))


@st.composite
def star_polygon(draw, integer=False):
    cr, cc = draw(st.floats(-4, 28)), draw(st.floats(-4, 28))
    n = draw(st.integers(3, 9))
    angles = sorted(draw(st.lists(st.floats(0, 2 * math.pi, exclude_max=True), min_size=n,
                                  max_size=n, unique=True)))
    radii = draw(st.lists(st.floats(1.0, 12.0), min_size=n, max_size=n))
    pts = np.array([[cr + r * math.sin(a), cc + r * math.cos(a)] for a, r in zip(angles, radii)])
    if integer:
        pts = np.round(pts)
    return pts


def _valid(poly):
    shape = Polygon([(c, r) for r, c in poly])
    return shape.is_valid and shape.area > 1e-6


@given(star_polygon())
def test_rasterize_matches_point_in_polygon_oracle(poly):
    if not _valid(poly) or _near_edge(poly, 24, 24):
        return
    got = rasterize_polygon([poly], 24, 24).astype(bool)
    assert np.array_equal(got, shapely_raster([poly], 24, 24))


@given(star_polygon(integer=True))
def test_rasterize_integer_vertices_counts_edge_centers_as_inside(poly):
    if not _valid(poly):
        return
    got = rasterize_polygon([poly], 24, 24).astype(bool)
    assert np.array_equal(got, shapely_raster([poly], 24, 24))


def test_triangle_example():
    got = rasterize_polygon([np.array([[0, 0], [0, 4], [4, 0]])], 8, 8)
    rr, cc = np.mgrid[0:8, 0:8]
    assert np.array_equal(got.astype(bool), rr + cc <= 4)


def test_polygon_fully_outside_is_empty():
    poly = np.array([[-10, -10], [-10, -3], [-3, -3]])
    assert not rasterize_polygon([poly], 16, 16).any()
    poly = np.array([[20, 20], [20, 30], [30, 30]])
    assert not rasterize_polygon([poly], 16, 16).any()


def test_rasterize_rejects_degenerate_polygon():
    with pytest.raises(ValueError):
        rasterize_polygon([np.array([[0, 0], [3, 3]])], 8, 8)


def neighbor_scan_boundary(seg):
    h, w = seg.shape
    out = np.zeros_like(seg)
    for r in range(h):
        for c in range(w):
            if not seg[r, c]:
                continue
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not seg[rr, cc]:
                    out[r, c] = 1
                    break
    return out


def test_boundary_matches_neighbor_scan_on_random_shapes():
    rng = np.random.default_rng(7)
    for _ in range(100):
        h, w = rng.integers(3, 20, 2)
        seg = (rng.uniform(size=(h, w)) < rng.uniform(0.2, 0.9)).astype(np.uint8)
        if not seg.any():
            seg[0, 0] = 1
        b = extract_boundary(seg).mask
        assert np.array_equal(b, neighbor_scan_boundary(seg))
        assert not (b & (1 - seg)).any()


def test_full_canvas_boundary_is_border_ring():
    b = extract_boundary(np.ones((6, 7), np.uint8)).mask
    ring = np.ones((6, 7), np.uint8)
    ring[1:-1, 1:-1] = 0
    assert np.array_equal(b, ring)


def test_boundary_of_empty_mask_is_rejected():
    with pytest.raises(ValueError):
        extract_boundary(np.zeros((4, 4), np.uint8))


def test_budget_pixels():
    gt = rect_gt(10, 10, 29, 29)  # 20x20 = 400 pixels
    assert gt.object_area == 400
    assert budget_pixels(gt, 0.05) == 20
    assert budget_pixels(gt, 0.035) == 14
    assert budget_pixels(rect_gt(0, 0, 1, 1), 0.05) == 1
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            budget_pixels(gt, bad)


def test_budget_pixels_is_robust_to_float_error():
    gt = GroundTruth((0, 0, 1, 1), (np.zeros((3, 2)),), 1000, (64, 64))
    assert budget_pixels(gt, 0.035) == 35


@given(st.integers(1, 200), st.integers(1, 200), st.integers(0, 10))
def test_stride_select_is_sorted_unique_and_in_range(n, k, seed):
    idx = stride_select(n, k, np.random.default_rng(seed))
    assert len(idx) == min(n, k)
    assert np.all(np.diff(idx) > 0)
    assert idx.min() >= 0 and idx.max() < n


@given(st.integers(2, 25), st.integers(2, 25), st.integers(1, 300), st.integers(0, 5))
def test_prior_contour_respects_budget_and_segmentation(h, w, budget, seed):
    gt = rect_gt(3, 3, 3 + h, 3 + w)
    m = prior_contour(gt, budget, seed)
    assert m.sum() <= budget
    assert not (m & (1 - gt.segmentation)).any()
    ring = extract_boundary(gt.segmentation).mask
    if budget <= ring.sum():
        assert m.sum() == budget and not (m & (1 - ring)).any()
    else:
        assert np.all(m[ring.astype(bool)] == 1)


def test_fit_budget_rejects_nonpositive_budget():
    with pytest.raises(ValueError):
        fit_budget(np.ones((3, 3), np.uint8), 0)


def test_coco_round_trip():
    gt = GroundTruth.from_polygons([np.array([[2.0, 3.0], [2.0, 11.0], [9.0, 7.0]])], (16, 16), ann_id=5)
    back = gt_from_coco(gt_to_coco(gt, image_id=1), 16, 16, "object")
    assert back.bbox == gt.bbox and back.object_area == gt.object_area and back.ann_id == 5
    assert np.array_equal(back.segmentation, gt.segmentation)
