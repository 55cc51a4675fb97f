"""Local relocation proposals for the selected pixel set."""
from __future__ import annotations

import math

import numpy as np


def neighbourhood(pixel, seg, r, occupied):
    """Free in-segment pixels within Chebyshev radius ``r`` (the pixel itself excluded)."""
    h, w = seg.shape
    row, col = pixel
    out = []
    for dr in range(-r, r + 1):
        for dc in range(-r, r + 1):
            if dr == 0 and dc == 0:
                continue
            rr, cc = row + dr, col + dc
            if 0 <= rr < h and 0 <= cc < w and seg[rr, cc] and (rr, cc) not in occupied:
                out.append((rr, cc))
    return out


def sample_pixel_set(current, seg, r, move_fraction, budget, rng):
    """Move ``ceil(move_fraction * n)`` random pixels to random free spots nearby.

    The output is index-aligned with ``current``: entry ``i`` is either the
    old pixel ``i`` or its replacement, never more than ``r`` away. Pixels
    with nowhere to go stay put. The list is cut to ``budget`` entries.
    """
    current = [(int(a), int(b)) for a, b in current]
    if not current:
        raise ValueError("pixel set is empty")
    if r < 1:
        raise ValueError(f"sample radius must be >= 1, got {r}")
    seg = np.asarray(seg).astype(bool)
    n = len(current)
    k = min(n, max(1, math.ceil(move_fraction * n)))
    movers = rng.choice(n, size=k, replace=False)
    occupied = set(current)
    out = list(current)
    for idx in movers:
        old = out[idx]
        options = neighbourhood(old, seg, r, occupied)
        if not options:
            continue
        new = options[int(rng.integers(len(options)))]
        occupied.discard(old)
        occupied.add(new)
        out[idx] = new
    return out[:budget]
