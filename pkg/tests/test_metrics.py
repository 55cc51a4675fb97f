import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asc.evaluation.metrics import best_match, iou, iou_many, is_detected, nms, sdr
from asc.victim.base import Detection
from conftest import rect_gt


def box_area_oracle(b):
    return max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])


def test_iou_examples():
    assert iou((0, 0, 10, 10), (5, 5, 15, 15)) == pytest.approx(25 / 175)
    assert iou((1, 2, 5, 9), (1, 2, 5, 9)) == 1.0
    assert iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
    assert iou((0, 0, 0, 5), (0, 0, 0, 5)) == 0.0


def test_iou_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a = np.sort(rng.uniform(0, 20, (2, 2)), axis=0).T.ravel()[[0, 2, 1, 3]]
        b = np.sort(rng.uniform(0, 20, (2, 2)), axis=0).T.ravel()[[0, 2, 1, 3]]
        a, b = tuple(a), tuple(b)
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == iou(b, a)
        if box_area_oracle(a) > 0:
            assert iou(a, a) == pytest.approx(1.0)
        # oracle on the interval arithmetic
        ih = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
        iw = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
        union = box_area_oracle(a) + box_area_oracle(b) - ih * iw
        expect = ih * iw / union if box_area_oracle(a) > 0 and box_area_oracle(b) > 0 else 0.0
        assert v == pytest.approx(expect, abs=1e-12)
        assert iou_many(np.array([a]), b)[0] == pytest.approx(v, abs=1e-12)


def _det(box, p):
    return Detection(tuple(float(v) for v in box), p)


def test_detection_criterion_is_strict():
    gt = rect_gt(0, 0, 10, 10)
    # a box shifted so IoU is 0.6 exactly: overlap 10 x w, union 10 x (20 - w)
    w = 7.5
    box = (0, 10 - w, 10, 20 - w)
    assert iou(box, gt.bbox) == pytest.approx(0.6)
    assert is_detected([_det(box, 0.6)], gt)
    assert not is_detected([_det(box, 0.5)], gt)
    assert not is_detected([], gt)
    half = (0, 10 - 20 / 3, 10, 20 - 20 / 3)
    assert iou(half, gt.bbox) == pytest.approx(0.5)
    assert not is_detected([_det((0, 0, 10, 20), 0.99)], gt)  # IoU exactly 0.5


def test_best_match():
    gt = (0, 0, 10, 10)
    dets = [_det((0, 0, 10, 10), 0.3), _det((0, 0, 10, 12), 0.9)]
    assert best_match(dets, gt) == (1.0, 0.3)
    assert best_match([], gt) == (0.0, 0.0)


def test_sdr():
    assert sdr([True, True, False, False]) == 0.5
    assert sdr([False] * 3) == 0.0
    assert sdr([True] * 983 + [False] * 17) == pytest.approx(0.983)
    with pytest.raises(ValueError):
        sdr([])


boxes_st = st.lists(st.tuples(st.floats(0, 30), st.floats(0, 30), st.floats(0.5, 15), st.floats(0.5, 15),
                              st.sampled_from([0.1, 0.5, 0.7, 0.9])), min_size=1, max_size=25)


@given(boxes_st)
def test_nms_survivors_do_not_overlap(items):
    boxes = np.array([[r, c, r + h, c + w] for r, c, h, w, _ in items])
    scores = np.array([p for *_, p in items])
    keep = nms(boxes, scores, 0.5)
    assert keep == nms(boxes, scores, 0.5)
    assert len(set(keep)) == len(keep)
    assert all(scores[keep[i]] >= scores[keep[i + 1]] for i in range(len(keep) - 1))
    for i in keep:
        for j in keep:
            if i < j:
                assert iou(boxes[i], boxes[j]) <= 0.5
    # every suppressed box overlaps a kept one with at least its score
    for k in set(range(len(boxes))) - set(keep):
        assert any(iou(boxes[k], boxes[i]) > 0.5 and scores[i] >= scores[k] for i in keep)


def test_nms_tie_break_prefers_lower_index():
    boxes = np.array([[0, 0, 10, 10], [0, 0, 10, 10.5]])
    assert nms(boxes, np.array([0.5, 0.5])) == [0]
