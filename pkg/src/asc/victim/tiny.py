"""A small anchor-grid detector with hand-written reverse-mode gradients.

Input is a 64x64 RGB image. A stack of ReLU convolutions feeds a 1x1 head
that emits, per cell of a 16x16 grid, one objectness logit and four box
terms: row/col centre offsets (tanh, at most one cell) and log height/width
relative to a 16-pixel anchor.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import kernels
from ..attack.loss import LossSpec, disappear_from_logits
from ..evaluation.metrics import iou_many, nms
from .base import Detection, LossGrad

INPUT_SIZE = 64
GRID = 16
CELL = INPUT_SIZE // GRID
ANCHOR = 16.0
SCORE_THRESHOLD = 0.05
NMS_IOU = 0.5
HEAD_CHANNELS = 5

# hidden layers as (out_channels, kernel, stride, pad)
DEFAULT_HIDDEN = ((8, 3, 2, 1), (16, 3, 2, 1))

WEIGHTS_MAGIC = b"ASCTINY\x00"
WEIGHTS_VERSION = 1


class WeightsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ConvLayer:
    weight: np.ndarray
    bias: np.ndarray
    stride: int
    pad: int

    def __post_init__(self):
        for arr in (self.weight, self.bias):
            arr.setflags(write=False)


def _cell_centers():
    c = np.arange(GRID) * CELL + (CELL - 1) / 2.0
    rows, cols = np.meshgrid(c, c, indexing="ij")
    return rows.ravel(), cols.ravel()


_CELL_ROWS, _CELL_COLS = _cell_centers()


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _as_box(gt):
    return tuple(gt.bbox) if hasattr(gt, "bbox") else tuple(gt)


class TinyDetector:
    """Immutable detector; all state lives in ``layers`` (the last one is the head)."""

    input_size = INPUT_SIZE

    def __init__(self, layers, history=None):
        self.layers = tuple(layers)
        if self.layers[-1].weight.shape[0] != HEAD_CHANNELS:
            raise ValueError("the last layer must be the 5-channel head")
        self.history = dict(history or {})

    @classmethod
    def initialize(cls, seed=0, hidden=DEFAULT_HIDDEN, head_kernel=1):
        rng = np.random.default_rng(seed)
        layers, cin = [], 3
        for cout, k, stride, pad in hidden:
            std = np.sqrt(2.0 / (cin * k * k))
            layers.append(ConvLayer(rng.normal(0.0, std, (cout, cin, k, k)), np.zeros(cout), stride, pad))
            cin = cout
        head_w = rng.normal(0.0, 0.01, (HEAD_CHANNELS, cin, head_kernel, head_kernel))
        head_b = np.zeros(HEAD_CHANNELS)
        head_b[0] = -4.0  # objectness prior: most cells are background
        layers.append(ConvLayer(head_w, head_b, 1, head_kernel // 2))
        return cls(layers)

    @classmethod
    def zeros(cls, hidden=DEFAULT_HIDDEN):
        layers, cin = [], 3
        for cout, k, stride, pad in hidden:
            layers.append(ConvLayer(np.zeros((cout, cin, k, k)), np.zeros(cout), stride, pad))
            cin = cout
        layers.append(ConvLayer(np.zeros((HEAD_CHANNELS, cin, 1, 1)), np.zeros(HEAD_CHANNELS), 1, 0))
        return cls(layers)

    @property
    def architecture(self):
        return [(l.weight.shape[0], l.weight.shape[2], l.stride, l.pad) for l in self.layers]

    # -- forward / backward over NCHW batches ---------------------------------

    def forward(self, xb: np.ndarray):
        """Head output ``(N, 5, 16, 16)`` plus the cache needed by ``backward``."""
        inputs, active = [], []
        a = np.ascontiguousarray(xb, dtype=np.float64)
        for layer in self.layers[:-1]:
            inputs.append(a)
            z = kernels.conv2d_forward(a, layer.weight, layer.bias, layer.stride, layer.pad)
            on = z > 0.0
            active.append(on)
            a = z * on
        head = self.layers[-1]
        inputs.append(a)
        out = kernels.conv2d_forward(a, head.weight, head.bias, head.stride, head.pad)
        return out, (inputs, active)

    def backward(self, cache, grad_head, weight_grads=False, input_grad=True):
        """Back-propagate ``grad_head``; returns ``(grad_input, [(gw, gb), ...])``."""
        inputs, active = cache
        g = np.ascontiguousarray(grad_head, dtype=np.float64)
        grads = [None] * len(self.layers)
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            want_input = idx > 0 or input_grad
            gx, gw, gb = kernels.conv2d_backward(inputs[idx], layer.weight, g, layer.stride,
                                                 layer.pad, want_input, weight_grads)
            grads[idx] = (gw, gb)
            if idx > 0:
                g = gx * active[idx - 1]
            else:
                g = gx
        return g, grads

    # -- single-image API -----------------------------------------------------

    def _to_batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise ValueError(f"expected a {INPUT_SIZE}x{INPUT_SIZE}x3 image, got {x.shape}")
        return x.transpose(2, 0, 1)[None]

    @staticmethod
    def decode(head: np.ndarray):
        """Per-cell boxes ``(256, 4)`` and objectness logits ``(256,)`` for one image."""
        o = head.reshape(HEAD_CHANNELS, -1)
        cy = _CELL_ROWS + np.tanh(o[1]) * CELL
        cx = _CELL_COLS + np.tanh(o[2]) * CELL
        hh = ANCHOR * np.exp(o[3]) / 2.0
        hw = ANCHOR * np.exp(o[4]) / 2.0
        boxes = np.stack([cy - hh, cx - hw, cy + hh, cx + hw], axis=1)
        return boxes, o[0].copy()

    def candidates(self, x):
        head, _ = self.forward(self._to_batch(x))
        boxes, logits = self.decode(head[0])
        return boxes, _sigmoid(logits)

    def detect(self, x) -> list[Detection]:
        boxes, scores = self.candidates(x)
        idx = np.nonzero(scores > SCORE_THRESHOLD)[0]
        keep = nms(boxes[idx], scores[idx], NMS_IOU)
        return [Detection(tuple(float(v) for v in boxes[idx[k]]), float(scores[idx[k]]))
                for k in keep]

    def loss_and_grad(self, x, gt, loss: LossSpec | None = None) -> LossGrad:
        """Disappearing loss over every candidate box matching ``gt``, and d/dx.

        Matching happens before score thresholding and NMS, so suppressed
        candidates are attacked too. The match set is piecewise constant in
        ``x`` and contributes no gradient of its own.
        """
        loss = loss or LossSpec()
        xb = self._to_batch(x)
        head, cache = self.forward(xb)
        boxes, logits = self.decode(head[0])
        matched = np.nonzero(iou_many(boxes, _as_box(gt)) > loss.iou_match_threshold)[0]
        if len(matched) == 0:
            return LossGrad(0.0, np.zeros((INPUT_SIZE, INPUT_SIZE, 3)), 0)
        value, dlogit = disappear_from_logits(logits[matched], loss.score_floor)
        ghead = np.zeros_like(head)
        ghead[0, 0].reshape(-1)[matched] = dlogit
        gx, _ = self.backward(cache, ghead)
        return LossGrad(value, gx[0].transpose(1, 2, 0).copy(), int(len(matched)))

    def loss_value(self, x, gt, loss: LossSpec | None = None) -> float:
        loss = loss or LossSpec()
        head, _ = self.forward(self._to_batch(x))
        boxes, logits = self.decode(head[0])
        matched = iou_many(boxes, _as_box(gt)) > loss.iou_match_threshold
        return disappear_from_logits(logits[matched], loss.score_floor)[0]

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<II", WEIGHTS_VERSION, len(self.layers)))
            for layer in self.layers:
                o, c, k, _ = layer.weight.shape
                fh.write(struct.pack("<5I", o, c, k, layer.stride, layer.pad))
            for layer in self.layers:
                fh.write(layer.weight.astype("<f8").tobytes(order="C"))
                fh.write(layer.bias.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "TinyDetector":
        buf = Path(path).read_bytes()
        if buf[:8] != WEIGHTS_MAGIC:
            raise WeightsFormatError(f"{path}: bad magic")
        if len(buf) < 16:
            raise WeightsFormatError(f"{path}: truncated header")
        version, n_layers = struct.unpack_from("<II", buf, 8)
        if version != WEIGHTS_VERSION:
            raise WeightsFormatError(f"{path}: unsupported version {version}")
        pos = 16
        shapes = []
        for _ in range(n_layers):
            if pos + 20 > len(buf):
                raise WeightsFormatError(f"{path}: truncated layer table")
            shapes.append(struct.unpack_from("<5I", buf, pos))
            pos += 20
        layers = []
        for o, c, k, stride, pad in shapes:
            nw, nb = o * c * k * k, o
            if pos + 8 * (nw + nb) > len(buf):
                raise WeightsFormatError(f"{path}: truncated weights")
            w = np.frombuffer(buf, "<f8", nw, pos).reshape(o, c, k, k).astype(np.float64)
            pos += 8 * nw
            b = np.frombuffer(buf, "<f8", nb, pos).astype(np.float64)
            pos += 8 * nb
            layers.append(ConvLayer(w, b, stride, pad))
        if pos != len(buf):
            raise WeightsFormatError(f"{path}: trailing bytes")
        return cls(layers)
