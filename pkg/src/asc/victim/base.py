from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class Detection:
    bbox: tuple[float, float, float, float]
    objectness: float
    category: str = "object"

    def __post_init__(self):
        r0, c0, r1, c1 = self.bbox
        if r0 > r1 or c0 > c1:
            raise ValueError(f"inverted box {self.bbox}")
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError(f"objectness {self.objectness} outside [0, 1]")


class LossGrad(NamedTuple):
    """Loss value, its gradient w.r.t. the input image, and how many candidates fed it.

    ``matched == 0`` flags a dead gradient path: the gradient is all zeros.
    """

    value: float
    grad: np.ndarray
    matched: int

    @property
    def dead(self) -> bool:
        return self.matched == 0


@runtime_checkable
class VictimModel(Protocol):
    def detect(self, x: np.ndarray) -> list[Detection]: ...

    def loss_and_grad(self, x: np.ndarray, gt, loss=None) -> LossGrad: ...
