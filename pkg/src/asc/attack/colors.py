"""Clipped gradient ascent on the colors of a fixed mask."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..imagecore import Pattern, apply_pattern


@dataclass
class ColorResult:
    colors: np.ndarray
    value: float
    evaluations: int
    trace: list = field(default_factory=list)
    dead: bool = False


def optimize_colors(model, x, mask, colors0, steps, step_size, gt, loss=None) -> ColorResult:
    """Run ``T <- clip(T + step_size * grad)`` on masked pixels and keep the best iterate.

    The starting colors count as iterate 0, so the returned value is never
    below the starting value. Gradient entries outside the mask are dropped.
    """
    mask = np.asarray(mask, dtype=np.uint8)
    sel = mask.astype(bool)[..., None]
    colors = np.clip(np.asarray(colors0, dtype=np.float64), 0.0, 1.0).copy()
    best_colors, best_value = colors.copy(), -np.inf
    trace = []
    for i in range(steps + 1):
        composite = apply_pattern(x, Pattern(mask, colors))
        lg = model.loss_and_grad(composite, gt, loss)
        trace.append(lg.value)
        if lg.value > best_value:
            best_colors, best_value = colors.copy(), lg.value
        if i == steps:
            break
        g = np.where(sel, lg.grad, 0.0)
        if i == 0 and not g.any():
            return ColorResult(colors, lg.value, 1, trace, dead=True)
        colors = np.clip(colors + step_size * g, 0.0, 1.0)
    return ColorResult(best_colors, float(best_value), len(trace), trace)
