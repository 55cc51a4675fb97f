"""Pure numpy convolution kernels (fallback when the compiled core is absent).

Layout is NCHW for activations and (O, C, k, k) for weights, float64 throughout.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _columns(x, k, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    return cols, ho, wo


def conv2d_forward(x, w, b, stride, pad):
    n = x.shape[0]
    o, _, k, _ = w.shape
    cols, ho, wo = _columns(x, k, stride, pad)
    y = cols @ w.reshape(o, -1).T + b
    return np.ascontiguousarray(y.reshape(n, ho, wo, o).transpose(0, 3, 1, 2))


def conv2d_backward(x, w, gy, stride, pad, need_input_grad=True, need_weight_grad=True):
    """Return ``(gx, gw, gb)``; entries not requested are ``None``."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho, wo = gy.shape[2:]
    gyr = gy.transpose(0, 2, 3, 1).reshape(-1, o)
    gx = gw = gb = None
    if need_weight_grad:
        cols, _, _ = _columns(x, k, stride, pad)
        gw = (gyr.T @ cols).reshape(w.shape)
        gb = gyr.sum(axis=0)
    if need_input_grad:
        gcols = (gyr @ w.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
        gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wd])
    return gx, gw, gb
