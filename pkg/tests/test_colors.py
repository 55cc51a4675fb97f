import numpy as np
import pytest

from asc.attack.colors import optimize_colors
from asc.imagecore import Pattern, apply_pattern
from asc.victim.surrogate import LinearSurrogate, QuadraticSurrogate


def test_empty_mask_keeps_start_colors():
    rng = np.random.default_rng(0)
    x, t0 = rng.uniform(size=(6, 6, 3)), rng.uniform(size=(6, 6, 3))
    model = QuadraticSurrogate(rng.uniform(size=(6, 6, 3)))
    res = optimize_colors(model, x, np.zeros((6, 6), np.uint8), t0, 10, 0.1, None)
    assert res.dead and np.array_equal(res.colors, t0)
    assert res.value == pytest.approx(model.loss_value(x))


def test_quadratic_target_is_reached_monotonically():
    rng = np.random.default_rng(1)
    x, c = rng.uniform(size=(5, 5, 3)), rng.uniform(size=(5, 5, 3))
    mask = (rng.uniform(size=(5, 5)) < 0.4).astype(np.uint8)
    model = QuadraticSurrogate(c)
    res = optimize_colors(model, x, mask, np.full(x.shape, 0.5), 200, 0.05, None)
    assert np.all(np.diff(res.trace) >= -1e-12)
    sel = mask.astype(bool)
    assert np.allclose(res.colors[sel], c[sel], atol=1e-6)
    # closed form: the optimum leaves only the unmasked residual
    assert res.value == pytest.approx(-((x - c)[~sel] ** 2).sum(), abs=1e-9)


def test_colors_stay_clipped_and_best_iterate_is_returned():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(4, 4, 3))
    w = rng.normal(size=(4, 4, 3)) * 50
    mask = np.ones((4, 4), np.uint8)
    res = optimize_colors(LinearSurrogate(w), x, mask, np.full(x.shape, 0.5), 5, 1.0, None)
    assert res.colors.min() >= 0.0 and res.colors.max() <= 1.0
    assert res.value == max(res.trace)
    assert np.array_equal(res.colors, (w > 0).astype(float))
    assert res.evaluations == 6


def test_unmasked_gradient_is_ignored():
    x = np.zeros((3, 3, 3))
    w = np.ones((3, 3, 3))
    mask = np.zeros((3, 3), np.uint8)
    mask[1, 1] = 1
    res = optimize_colors(LinearSurrogate(w), x, mask, np.zeros_like(x), 3, 0.1, None)
    changed = np.argwhere(res.colors.any(axis=2)).tolist()
    assert changed == [[1, 1]]
    assert np.array_equal(apply_pattern(x, Pattern(mask, res.colors))[0, 0], x[0, 0])
