"""The disappearing objective."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

P_FLOOR = 1e-12


@dataclass(frozen=True)
class LossSpec:
    kind: str = "disappear"
    iou_match_threshold: float = 0.5
    score_floor: float = P_FLOOR

    def __post_init__(self):
        if self.kind != "disappear":
            raise ValueError(f"unsupported loss kind {self.kind!r}")
        if not 0.0 < self.iou_match_threshold < 1.0:
            raise ValueError("iou_match_threshold must lie in (0, 1)")
        if not 0.0 < self.score_floor < 1.0:
            raise ValueError("score_floor must lie in (0, 1)")


def disappear_loss(scores, floor: float = P_FLOOR) -> float:
    """``-sum(log p)`` over the matched objectness scores, each floored at ``floor``."""
    p = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=np.float64)
    if p.size == 0:
        return 0.0
    return float(-np.log(np.maximum(p, floor)).sum())


def disappear_from_logits(logits: np.ndarray, floor: float = P_FLOOR) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(logit) for matched sigmoid logits.

    Works in log-space (``log sigmoid(z) = -softplus(-z)``) so saturated
    logits neither overflow nor lose the gradient before the floor kicks in.
    """
    z = np.asarray(logits, dtype=np.float64)
    log_floor = math.log(floor)
    log_p = -np.logaddexp(0.0, -z)
    floored = log_p < log_floor
    value = float(-np.where(floored, log_floor, log_p).sum())
    # d/dz [-log sigmoid(z)] = sigmoid(z) - 1
    grad = np.where(floored, 0.0, -np.exp(-np.logaddexp(0.0, z)))
    return value, grad
