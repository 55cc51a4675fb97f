"""Central finite differences of a victim's loss, used to check analytic gradients."""
from __future__ import annotations

import numpy as np


def _loss(model, x, gt, loss):
    if hasattr(model, "loss_value"):
        return model.loss_value(x, gt, loss)
    return model.loss_and_grad(x, gt, loss).value


def finite_diff_grad(model, x, gt, loss=None, eps=1e-4, sample_pixels=50, rng=None):
    """Estimate dJ/dx at a few ``(row, col, channel)`` coordinates.

    ``sample_pixels`` is either a count (coordinates drawn uniformly with
    ``rng``) or an explicit sequence of coordinates. Returns
    ``(coords, estimates)`` with ``coords`` of shape ``(k, 3)``.
    """
    x = np.array(x, dtype=np.float64)
    if np.isscalar(sample_pixels):
        rng = rng if rng is not None else np.random.default_rng(0)
        h, w, ch = x.shape
        flat = rng.choice(h * w * ch, size=int(sample_pixels), replace=False)
        coords = np.stack(np.unravel_index(flat, x.shape), axis=1)
    else:
        coords = np.asarray(sample_pixels, dtype=np.int64).reshape(-1, 3)
    est = np.empty(len(coords))
    for i, (r, c, k) in enumerate(coords):
        orig = x[r, c, k]
        x[r, c, k] = orig + eps
        up = _loss(model, x, gt, loss)
        x[r, c, k] = orig - eps
        down = _loss(model, x, gt, loss)
        x[r, c, k] = orig
        est[i] = (up - down) / (2.0 * eps)
    return coords, est


def relative_error(analytic, numeric, floor=1e-8):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps true zeros from blowing up."""
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
