import numpy as np
import pytest
from hypothesis import settings

from asc.contour import GroundTruth

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def rect_gt(r0, c0, r1, c1, canvas=(64, 64)):
    """Ground truth for an axis-aligned rectangle with corners on pixel centers."""
    poly = [[r0, c0], [r0, c1], [r1, c1], [r1, c0]]
    return GroundTruth.from_polygons([poly], canvas)


def near_target(gt, k, rng, margin=4):
    """Coordinates inside the target box grown by ``margin``, where the loss is alive."""
    r0, c0, r1, c1 = gt.bbox
    h, w = gt.canvas
    rows = rng.integers(max(0, int(r0) - margin), min(h, int(r1) + margin + 1), k)
    cols = rng.integers(max(0, int(c0) - margin), min(w, int(c1) + margin + 1), k)
    return np.stack([rows, cols, rng.integers(0, 3, k)], axis=1)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []
BENCH_TABLE = []


def pytest_terminal_summary(terminalreporter):
    if BENCH_TABLE:
        terminalreporter.section("benchmark SDR table")
        terminalreporter.write(BENCH_TABLE[0])
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_model():
    """Detector trained briefly on a small set; enough structure for integration tests."""
    from asc.victim.scenes import gen_scenes
    from asc.victim.train import train_tiny

    return train_tiny(gen_scenes(300, 0), epochs=6, lr=0.01, seed=0)
