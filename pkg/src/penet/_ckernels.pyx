# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels.

Inputs arrive already zero padded; every output element is accumulated in
(c, u, v) order starting from 0.0, and the bias is added last. This mirrors
:mod:`penet._pykernels` term for term so both backends agree bit for bit on
the forward pass.
"""
import numpy as np
cimport numpy as cnp

ctypedef fused real:
    float
    double
    long double


cdef object _dtype_of(real dummy):
    if real is float:
        return np.float32
    elif real is double:
        return np.float64
    return np.longdouble


def conv2d_forward(real[:, :, ::1] xpad, real[:, :, :, ::1] w, real[::1] b):
    cdef Py_ssize_t n_out = w.shape[0], n_in = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t h = xpad.shape[1] - k + 1, wd = xpad.shape[2] - k + 1
    cdef Py_ssize_t o, c, u, v, i, j
    cdef real acc
    dtype = _dtype_of(<real>0)
    out = np.empty((n_out, h, wd), dtype=dtype)
    cdef real[:, :, ::1] y = out
    with nogil:
        for o in range(n_out):
            for i in range(h):
                for j in range(wd):
                    acc = 0
                    for c in range(n_in):
                        for u in range(k):
                            for v in range(k):
                                acc = acc + w[o, c, u, v] * xpad[c, i + u, j + v]
                    y[o, i, j] = acc + b[o]
    return out


def conv2d_backward(real[:, :, ::1] xpad, real[:, :, :, ::1] w, real[:, :, ::1] g):
    """Return (grad of padded input, grad of weight, grad of bias)."""
    cdef Py_ssize_t n_out = w.shape[0], n_in = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t h = g.shape[1], wd = g.shape[2]
    cdef Py_ssize_t o, c, u, v, i, j
    cdef real acc, go, wv
    cdef real acc9[9]
    dtype = _dtype_of(<real>0)
    gx_arr = np.zeros((n_in, xpad.shape[1], xpad.shape[2]), dtype=dtype)
    gw_arr = np.empty((n_out, n_in, k, k), dtype=dtype)
    gb_arr = np.empty(n_out, dtype=dtype)
    cdef real[:, :, ::1] gx = gx_arr
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    with nogil:
        for o in range(n_out):
            acc = 0
            for i in range(h):
                for j in range(wd):
                    acc = acc + g[o, i, j]
            gb[o] = acc
        # nine running sums per (o, c) so each g[o, i, j] is loaded once
        for o in range(n_out):
            for c in range(n_in):
                for u in range(k * k):
                    acc9[u] = 0
                for i in range(h):
                    for j in range(wd):
                        go = g[o, i, j]
                        for u in range(k):
                            for v in range(k):
                                acc9[u * k + v] = acc9[u * k + v] + go * xpad[c, i + u, j + v]
                for u in range(k):
                    for v in range(k):
                        gw[o, c, u, v] = acc9[u * k + v]
        # scatter as contiguous row updates: gx[c, i+u, v:v+wd] += w * g[o, i, :]
        for c in range(n_in):
            for o in range(n_out):
                for u in range(k):
                    for v in range(k):
                        wv = w[o, c, u, v]
                        for i in range(h):
                            for j in range(wd):
                                gx[c, i + u, j + v] += wv * g[o, i, j]
    return gx_arr, gw_arr, gb_arr
