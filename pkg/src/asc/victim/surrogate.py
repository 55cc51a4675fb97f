"""Closed-form victims with known optima, for checking the optimizer itself.

Both report the target as confidently detected no matter what, so an attack
against them never stops early and always spends its full round budget.
"""
from __future__ import annotations

import numpy as np

from .base import Detection, LossGrad


class _AlwaysDetected:
    """Until ``watch`` is called there is nothing to detect."""

    def detect(self, x):
        box = getattr(self, "_box", None)
        return [Detection(box, 1.0)] if box is not None else []

    def watch(self, gt):
        """Report ``gt``'s box as the sole detection from now on."""
        self._box = tuple(float(v) for v in gt.bbox)
        return self


class LinearSurrogate(_AlwaysDetected):
    """``J(x) = <w, x>``; the gradient is ``w`` everywhere."""

    def __init__(self, w):
        self.w = np.asarray(w, dtype=np.float64)

    def loss_and_grad(self, x, gt=None, loss=None):
        x = np.asarray(x, dtype=np.float64)
        return LossGrad(float((self.w * x).sum()), self.w.copy(), 1)

    def loss_value(self, x, gt=None, loss=None):
        return float((self.w * np.asarray(x, dtype=np.float64)).sum())

    def best_gain(self, x, budget):
        """Optimal J over all masks of at most ``budget`` pixels, with ideal colors.

        Each replaced pixel ``p`` gains ``sum_ch max(w, 0) - w * x`` (color 1
        where ``w > 0``, 0 otherwise), so the optimum takes the top gains.
        """
        x = np.asarray(x, dtype=np.float64)
        gain = (np.maximum(self.w, 0.0) - self.w * x).sum(axis=2).ravel()
        base = float((self.w * x).sum())
        return base + float(np.sort(gain)[::-1][:budget].clip(min=0.0).sum())


class QuadraticSurrogate(_AlwaysDetected):
    """``J(x) = -||x - c||^2``, maximized where the image equals ``c``."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=np.float64)

    def loss_and_grad(self, x, gt=None, loss=None):
        d = np.asarray(x, dtype=np.float64) - self.c
        return LossGrad(float(-(d * d).sum()), -2.0 * d, 1)

    def loss_value(self, x, gt=None, loss=None):
        d = np.asarray(x, dtype=np.float64) - self.c
        return float(-(d * d).sum())
