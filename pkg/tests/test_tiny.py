import numpy as np
import pytest

from asc.attack.loss import LossSpec
from asc.evaluation.metrics import iou
from asc.victim.base import VictimModel
from asc.victim.gradcheck import finite_diff_grad, relative_error
from asc.victim.scenes import gen_scenes
from asc.victim.tiny import GRID, TinyDetector, WeightsFormatError
from asc.victim.train import train_tiny
from conftest import near_target


def test_implements_victim_protocol():
    assert isinstance(TinyDetector.initialize(0), VictimModel)


def test_zero_weights_give_uniform_objectness_and_deterministic_nms():
    m = TinyDetector.zeros()
    x = np.random.default_rng(0).uniform(size=(64, 64, 3))
    boxes, p = m.candidates(x)
    assert np.all(p == 0.5) and boxes.shape == (GRID * GRID, 4)
    d1, d2 = m.detect(x), m.detect(x)
    assert d1 == d2 and len(d1) > 0
    assert all(d.objectness == 0.5 for d in d1)
    for a in d1:
        for b in d1:
            if a is not b:
                assert iou(a.bbox, b.bbox) <= 0.5


def test_nothing_above_threshold_gives_no_detections():
    assert TinyDetector.initialize(0).detect(np.zeros((64, 64, 3))) == []


def test_rejects_wrong_input_shape():
    with pytest.raises(ValueError):
        TinyDetector.initialize(0).detect(np.zeros((32, 32, 3)))


def anchor_box(gt):
    """A 16-pixel box on the target center; untrained heads predict about this size."""
    cr, cc = gt.center
    return (cr - 8.0, cc - 8.0, cr + 8.0, cc + 8.0)


def test_gradient_matches_finite_differences_untrained():
    m = TinyDetector.initialize(3)
    rng = np.random.default_rng(0)
    for s in gen_scenes(3, 5):
        box = anchor_box(s.target)
        lg = m.loss_and_grad(s.image, box)
        assert not lg.dead
        coords, fd = finite_diff_grad(m, s.image, box, None, 1e-4, near_target(s.target, 50, rng))
        err = relative_error(lg.grad[coords[:, 0], coords[:, 1], coords[:, 2]], fd)
        assert np.mean(err < 1e-3) >= 0.95


def test_dead_path_returns_flagged_zero_gradient():
    m = TinyDetector.initialize(0)
    far = (0.0, 0.0, 0.5, 0.5)  # no anchor box can overlap this by half
    lg = m.loss_and_grad(np.zeros((64, 64, 3)), far)
    assert lg.dead and lg.value == 0.0 and not lg.grad.any()


def test_loss_sums_over_matches_and_ignores_order():
    m = TinyDetector.initialize(1)
    s = gen_scenes(1, 2)[0]
    lg = m.loss_and_grad(s.image, s.target)
    assert lg.value == pytest.approx(m.loss_value(s.image, s.target), abs=1e-12)
    looser = m.loss_and_grad(s.image, s.target, LossSpec(iou_match_threshold=0.1))
    assert looser.matched >= lg.matched and looser.value >= lg.value


def test_save_load_round_trip(tmp_path):
    m = TinyDetector.initialize(4)
    m.save(tmp_path / "w.bin")
    back = TinyDetector.load(tmp_path / "w.bin")
    assert back.architecture == m.architecture
    for a, b in zip(m.layers, back.layers):
        assert np.array_equal(a.weight, b.weight) and np.array_equal(a.bias, b.bias)
    data = (tmp_path / "w.bin").read_bytes()
    for bad in (b"XXXXXXXX" + data[8:], data[:-8], data + b"\0"):
        (tmp_path / "bad.bin").write_bytes(bad)
        with pytest.raises(WeightsFormatError):
            TinyDetector.load(tmp_path / "bad.bin")


def test_training_is_deterministic_and_lr_zero_is_a_no_op():
    data = gen_scenes(40, 9)
    a = train_tiny(data, epochs=1, lr=0.01, seed=5)
    b = train_tiny(data, epochs=1, lr=0.01, seed=5)
    init = TinyDetector.initialize(5)
    frozen = train_tiny(data, epochs=1, lr=0.0, seed=5)
    for la, lb, li, lf in zip(a.layers, b.layers, init.layers, frozen.layers):
        assert np.array_equal(la.weight, lb.weight)
        assert np.array_equal(li.weight, lf.weight) and np.array_equal(li.bias, lf.bias)
    assert "val_sdr" in a.history


def test_training_rejects_empty_dataset():
    with pytest.raises(ValueError):
        train_tiny([], epochs=1)


def test_short_training_learns_something(small_model):
    assert small_model.history["loss"][-1] < small_model.history["loss"][0]
