import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chi2

from asc.attack.sampling import neighbourhood, sample_pixel_set


@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(0.01, 1.0), st.integers(1, 40))
def test_proposal_invariants(seed, r, frac, budget):
    rng = np.random.default_rng(seed)
    seg = rng.uniform(size=(16, 16)) < 0.7
    pix = [tuple(p) for p in np.argwhere(seg)]
    idx = rng.choice(len(pix), size=min(len(pix), 20), replace=False)
    current = [pix[i] for i in sorted(idx)]
    out = sample_pixel_set(current, seg, r, frac, budget, rng)
    assert len(out) == min(len(current), budget)
    assert len(set(out)) == len(out)
    for old, new in zip(current, out):
        assert max(abs(old[0] - new[0]), abs(old[1] - new[1])) <= r
        assert seg[new]
    moved = sum(a != b for a, b in zip(current, out))
    assert moved <= int(np.ceil(frac * len(current)))


def test_tiny_fraction_moves_at_most_one_pixel():
    seg = np.ones((10, 10), bool)
    current = [(2, 2), (5, 5), (7, 1)]
    out = sample_pixel_set(current, seg, 2, 1e-6, 10, np.random.default_rng(0))
    assert sum(a != b for a, b in zip(current, out)) == 1


def test_blocked_pixel_stays():
    seg = np.zeros((5, 5), bool)
    seg[2, 2] = True
    assert sample_pixel_set([(2, 2)], seg, 1, 1.0, 5, np.random.default_rng(0)) == [(2, 2)]
    seg[1:4, 1:4] = True
    crowd = [(r, c) for r in range(1, 4) for c in range(1, 4)]
    assert sample_pixel_set(crowd, seg, 1, 1.0, 20, np.random.default_rng(0)) == crowd


def test_errors():
    seg = np.ones((4, 4), bool)
    with pytest.raises(ValueError):
        sample_pixel_set([], seg, 1, 0.5, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_pixel_set([(1, 1)], seg, 0, 0.5, 3, np.random.default_rng(0))


def test_relocation_offsets_are_uniform_over_the_legal_neighbourhood():
    seg = np.ones((11, 11), bool)
    seg[3, 4] = False  # punch holes so the legal set is irregular
    seg[6, 7] = False
    start = (5, 5)
    legal = neighbourhood(start, seg, 2, {start})
    counts = {p: 0 for p in legal}
    rng = np.random.default_rng(42)
    n = 10_000
    for _ in range(n):
        counts[sample_pixel_set([start], seg, 2, 1.0, 1, rng)[0]] += 1
    obs = np.array(list(counts.values()))
    expected = n / len(legal)
    stat = ((obs - expected) ** 2 / expected).sum()
    assert stat < chi2.ppf(0.999, len(legal) - 1)
