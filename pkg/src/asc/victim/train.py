"""Training loop for :class:`TinyDetector`."""
from __future__ import annotations

import logging

import numpy as np

from ..evaluation.metrics import is_detected, sdr
from .tiny import ANCHOR, CELL, GRID, DEFAULT_HIDDEN, ConvLayer, TinyDetector, _sigmoid

log = logging.getLogger(__name__)

BOX_WEIGHT = 5.0
POS_WEIGHT = 4.0
SMOOTH_BETA = 0.1
MAX_OFFSET = 0.95


def _targets(objects):
    """Per-cell training targets for one image.

    The cell holding an object's centre is the positive; its 8 neighbours are
    left out of the objectness loss but still regress the box, so near-centre
    candidates decode to sensible boxes too.
    """
    obj = np.zeros((GRID, GRID))
    obj_w = np.ones((GRID, GRID))
    box = np.zeros((4, GRID, GRID))
    box_w = np.zeros((GRID, GRID))
    for gt in objects:
        r0, c0, r1, c1 = gt.bbox
        cy, cx = (r0 + r1) / 2.0, (c0 + c1) / 2.0
        h, w = max(r1 - r0, 1.0), max(c1 - c0, 1.0)
        gi = min(GRID - 1, max(0, int((cy + 0.5) // CELL)))
        gj = min(GRID - 1, max(0, int((cx + 0.5) // CELL)))
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                i, j = gi + di, gj + dj
                if not (0 <= i < GRID and 0 <= j < GRID):
                    continue
                if di or dj:
                    if obj[i, j] == 0:
                        obj_w[i, j] = 0.0
                else:
                    obj[i, j], obj_w[i, j] = 1.0, POS_WEIGHT
                ccy, ccx = i * CELL + (CELL - 1) / 2.0, j * CELL + (CELL - 1) / 2.0
                box[:, i, j] = (np.clip((cy - ccy) / CELL, -MAX_OFFSET, MAX_OFFSET),
                                np.clip((cx - ccx) / CELL, -MAX_OFFSET, MAX_OFFSET),
                                np.log(h / ANCHOR), np.log(w / ANCHOR))
                box_w[i, j] = 1.0 if not (di or dj) else 0.5
    return obj, obj_w, box, box_w


def _smooth_l1(d):
    a = np.abs(d)
    val = np.where(a < SMOOTH_BETA, 0.5 * d * d / SMOOTH_BETA, a - 0.5 * SMOOTH_BETA)
    grad = np.where(a < SMOOTH_BETA, d / SMOOTH_BETA, np.sign(d))
    return val, grad


def detection_loss(head, targets):
    """Batch loss and its gradient w.r.t. the head output ``(N, 5, G, G)``."""
    obj, obj_w, box, box_w = targets
    n = head.shape[0]
    z = head[:, 0]
    p = _sigmoid(z)
    bce = obj_w * (np.logaddexp(0.0, z) - obj * z)
    g = np.zeros_like(head)
    g[:, 0] = obj_w * (p - obj)

    t_off = np.tanh(head[:, 1:3])
    v_off, g_off = _smooth_l1(t_off - box[:, 0:2])
    v_size, g_size = _smooth_l1(head[:, 3:5] - box[:, 2:4])
    wb = BOX_WEIGHT * box_w[:, None]
    g[:, 1:3] = wb * g_off * (1.0 - t_off ** 2)
    g[:, 3:5] = wb * g_size
    total = bce.sum() + (wb * v_off).sum() + (wb * v_size).sum()
    return total / n, g / n


def clean_sdr(model, scenes) -> float:
    return sdr([is_detected(model.detect(s.image), s.target) for s in scenes])


def train_tiny(dataset, epochs=30, lr=0.005, seed=0, batch_size=16, val_fraction=0.1,
               hidden=DEFAULT_HIDDEN, head_kernel=1, progress=None) -> TinyDetector:
    """Fit a detector with Adam; deterministic for a fixed seed.

    The last ``val_fraction`` of ``dataset`` is held out and scored with the
    clean detection criterion; the result lands in ``model.history``.
    """
    scenes = list(dataset)
    if not scenes:
        raise ValueError("cannot train on an empty dataset")
    n_val = int(len(scenes) * val_fraction) if len(scenes) >= 10 else 0
    train, val = scenes[:len(scenes) - n_val], scenes[len(scenes) - n_val:]

    model = TinyDetector.initialize(seed, hidden, head_kernel)
    params = [np.array(a) for layer in model.layers for a in (layer.weight, layer.bias)]
    m1 = [np.zeros_like(a) for a in params]
    m2 = [np.zeros_like(a) for a in params]
    b1, b2, eps = 0.9, 0.999, 1e-8

    images = np.stack([s.image.transpose(2, 0, 1) for s in train])
    targets = [_targets(s.objects) for s in train]
    stacked = tuple(np.stack([t[k] for t in targets]) for k in range(4))

    rng = np.random.default_rng(seed)
    step, losses = 0, []
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        running = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            head, cache = model.forward(images[idx])
            value, ghead = detection_loss(head, tuple(t[idx] for t in stacked))
            _, grads = model.backward(cache, ghead, weight_grads=True, input_grad=False)
            flat = [a for pair in grads for a in pair]
            step += 1
            for k, gk in enumerate(flat):
                m1[k] = b1 * m1[k] + (1 - b1) * gk
                m2[k] = b2 * m2[k] + (1 - b2) * gk * gk
                mh = m1[k] / (1 - b1 ** step)
                vh = m2[k] / (1 - b2 ** step)
                params[k] = params[k] - lr * mh / (np.sqrt(vh) + eps)
            model = _rebuild(model, params)
            running += value * len(idx)
        losses.append(running / len(train))
        log.info("epoch %d loss %.4f", epoch + 1, losses[-1])
        if progress is not None:
            progress(epoch, losses[-1])

    history = {"loss": losses, "epochs": epochs, "lr": lr, "seed": seed,
               "n_train": len(train), "n_val": len(val)}
    if val:
        history["val_sdr"] = clean_sdr(model, val)
        log.info("validation clean SDR %.4f", history["val_sdr"])
    return TinyDetector(model.layers, history)


def _rebuild(model, params):
    layers = []
    for k, layer in enumerate(model.layers):
        layers.append(ConvLayer(params[2 * k].copy(), params[2 * k + 1].copy(),
                                layer.stride, layer.pad))
    return TinyDetector(layers)
