"""Box overlap, the detection criterion and the successful-detection rate."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

DETECT_IOU = 0.5
DETECT_CONF = 0.5


def box_area(b) -> float:
    return max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])


def iou(a, b) -> float:
    """Intersection over union of ``(row_min, col_min, row_max, col_max)`` boxes.

    A zero-area box has IoU 0 with everything, itself included.
    """
    area_a, area_b = box_area(a), box_area(b)
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    ih = min(a[2], b[2]) - max(a[0], b[0])
    iw = min(a[3], b[3]) - max(a[1], b[1])
    if ih <= 0.0 or iw <= 0.0:
        return 0.0
    inter = ih * iw
    return float(inter / (area_a + area_b - inter))


def iou_many(boxes: np.ndarray, ref) -> np.ndarray:
    """IoU of each row of ``boxes`` (shape ``(n, 4)``) against one box."""
    boxes = np.asarray(boxes, dtype=np.float64)
    area = np.clip(boxes[:, 2] - boxes[:, 0], 0, None) * np.clip(boxes[:, 3] - boxes[:, 1], 0, None)
    ref_area = box_area(ref)
    if ref_area <= 0.0:
        return np.zeros(len(boxes))
    ih = np.clip(np.minimum(boxes[:, 2], ref[2]) - np.maximum(boxes[:, 0], ref[0]), 0, None)
    iw = np.clip(np.minimum(boxes[:, 3], ref[3]) - np.maximum(boxes[:, 1], ref[1]), 0, None)
    inter = ih * iw
    union = area + ref_area - inter
    out = np.zeros(len(boxes))
    ok = (area > 0) & (union > 0)
    out[ok] = inter[ok] / union[ok]
    return out


def nms(boxes: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> list[int]:
    """Greedy NMS; returns kept indices ordered by descending score.

    Ties in score keep the lower index first, so the output is deterministic.
    """
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    keep: list[int] = []
    boxes = np.asarray(boxes, dtype=np.float64)
    alive = np.ones(len(order), dtype=bool)
    for pos, idx in enumerate(order):
        if not alive[pos]:
            continue
        keep.append(int(idx))
        rest = order[pos + 1:]
        if len(rest):
            overlap = iou_many(boxes[rest], boxes[idx])
            alive[pos + 1:] &= overlap <= threshold
    return keep


def best_match(dets: Sequence, gt_box) -> tuple[float, float]:
    """``(best_iou, best_conf)`` over detections; conf is that of the best-IoU box."""
    best_iou, best_conf = 0.0, 0.0
    for d in dets:
        v = iou(d.bbox, gt_box)
        if v > best_iou or (v == best_iou and d.objectness > best_conf):
            best_iou, best_conf = v, float(d.objectness)
    return best_iou, best_conf


def is_detected(dets: Iterable, gt) -> bool:
    """True iff some detection has IoU > 0.5 with the target and objectness > 0.5."""
    box = gt.bbox if hasattr(gt, "bbox") else gt
    return any(iou(d.bbox, box) > DETECT_IOU and d.objectness > DETECT_CONF for d in dets)


def sdr(per_image_detected: Sequence[bool]) -> float:
    flags = list(per_image_detected)
    if not flags:
        raise ValueError("SDR of an empty image set is undefined")
    return sum(bool(f) for f in flags) / len(flags)
