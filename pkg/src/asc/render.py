"""Side-by-side panels of an image, a pattern and the patched result."""
from __future__ import annotations

import numpy as np

from .imagecore import Pattern, apply_pattern, as_image, as_mask

GAP = 2


def _upscale(img: np.ndarray, scale: int) -> np.ndarray:
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def pattern_tiles(x, pattern: Pattern):
    """``[x, M, T (masked), x + P]`` as RGB float images of equal size."""
    x = as_image(x)
    m = as_mask(pattern.mask).astype(bool)
    mask_rgb = np.repeat(m[..., None].astype(np.float64), 3, axis=2)
    colors = np.where(m[..., None], pattern.colors, 0.0)
    return [x, mask_rgb, colors, apply_pattern(x, pattern)]


def panel(tiles, scale: int = 4, gap: int = GAP) -> np.ndarray:
    """Tiles laid out left to right on a white strip, each enlarged ``scale`` times."""
    big = [_upscale(np.asarray(t, dtype=np.float64), scale) for t in tiles]
    h = max(t.shape[0] for t in big)
    w = sum(t.shape[1] for t in big) + gap * (len(big) - 1)
    out = np.ones((h, w, 3))
    col = 0
    for t in big:
        out[:t.shape[0], col:col + t.shape[1]] = t
        col += t.shape[1] + gap
    return out
