# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels; same contract as ``_kernels_py``.

Patch gathering (im2col) and its adjoint scatter (col2im) run in C; the
channel contraction goes through numpy's BLAS matmul. Column layout is
``(C*K*K, N*Ho*Wo)`` so the forward product needs no transpose per image.
"""
import numpy as np


cdef void _im2col(const double[:, :, :, ::1] x, double[:, ::1] cols, Py_ssize_t K,
                  Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t Ho, Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t n_img = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t n, c, ki, kj, i, j, r, q, row, base
    for c in range(C):
        for ki in range(K):
            for kj in range(K):
                row = (c * K + ki) * K + kj
                for n in range(n_img):
                    base = n * Ho * Wo
                    for i in range(Ho):
                        r = i * stride + ki - pad
                        if r < 0 or r >= H:
                            for j in range(Wo):
                                cols[row, base + i * Wo + j] = 0.0
                            continue
                        for j in range(Wo):
                            q = j * stride + kj - pad
                            if q < 0 or q >= W:
                                cols[row, base + i * Wo + j] = 0.0
                            else:
                                cols[row, base + i * Wo + j] = x[n, c, r, q]


cdef void _col2im(const double[:, ::1] cols, double[:, :, :, ::1] gx, Py_ssize_t K,
                  Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t Ho, Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t n_img = gx.shape[0], C = gx.shape[1], H = gx.shape[2], W = gx.shape[3]
    cdef Py_ssize_t n, c, ki, kj, i, j, r, q, row, base
    for c in range(C):
        for ki in range(K):
            for kj in range(K):
                row = (c * K + ki) * K + kj
                for n in range(n_img):
                    base = n * Ho * Wo
                    for i in range(Ho):
                        r = i * stride + ki - pad
                        if r < 0 or r >= H:
                            continue
                        for j in range(Wo):
                            q = j * stride + kj - pad
                            if 0 <= q < W:
                                gx[n, c, r, q] += cols[row, base + i * Wo + j]


def _out_size(Py_ssize_t size, Py_ssize_t K, Py_ssize_t stride, Py_ssize_t pad):
    return (size + 2 * pad - K) // stride + 1


def im2col(x, int K, int stride, int pad):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    ho, wo = _out_size(h, K, stride, pad), _out_size(w, K, stride, pad)
    cols = np.empty((c * K * K, n * ho * wo), dtype=np.float64)
    _im2col(x, cols, K, stride, pad, ho, wo)
    return cols, ho, wo


def conv2d_forward(x, w, b, int stride, int pad):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    o, _, k, _ = w.shape
    cols, ho, wo = im2col(x, k, stride, pad)
    y = w.reshape(o, -1) @ cols
    y += np.asarray(b)[:, None]
    return np.ascontiguousarray(y.reshape(o, n, ho, wo).transpose(1, 0, 2, 3))


def conv2d_backward(x, w, gy, int stride, int pad,
                    bint need_input_grad=True, bint need_weight_grad=True):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho, wo = gy.shape[2], gy.shape[3]
    gyr = np.ascontiguousarray(np.asarray(gy).transpose(1, 0, 2, 3)).reshape(o, -1)
    gx = gw = gb = None
    if need_weight_grad:
        cols, _, _ = im2col(x, k, stride, pad)
        gw = (gyr @ cols.T).reshape(w.shape)
        gb = gyr.sum(axis=1)
    if need_input_grad:
        gcols = np.ascontiguousarray(w.reshape(o, -1).T @ gyr)
        gx = np.zeros((n, c, h, wd), dtype=np.float64)
        _col2im(gcols, gx, k, stride, pad, ho, wo)
    return gx, gw, gb
