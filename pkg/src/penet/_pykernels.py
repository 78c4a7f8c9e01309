"""Pure numpy convolution kernels, used when the compiled extension is absent.

Same contract as the Cython module: ``xpad`` is already zero padded, outputs
accumulate in (c, u, v) order from zero and the bias is added last. Loops are
vectorized over output channels and pixels only, never over the reduction, so
per-element rounding matches the compiled path exactly.
"""

import numpy as np


def conv2d_forward(xpad, w, b):
    n_out, n_in, k, _ = w.shape
    h = xpad.shape[1] - k + 1
    wd = xpad.shape[2] - k + 1
    out = np.zeros((n_out, h, wd), dtype=xpad.dtype)
    for c in range(n_in):
        for u in range(k):
            for v in range(k):
                out += w[:, c, u, v, None, None] * xpad[None, c, u:u + h, v:v + wd]
    out += b[:, None, None]
    return out


def conv2d_backward(xpad, w, g):
    n_out, n_in, k, _ = w.shape
    h, wd = g.shape[1:]
    gx = np.zeros_like(xpad)
    gw = np.empty_like(w)
    for u in range(k):
        for v in range(k):
            window = xpad[:, u:u + h, v:v + wd]
            gw[:, :, u, v] = np.einsum("oij,cij->oc", g, window)
            gx[:, u:u + h, v:v + wd] += np.einsum("oc,oij->cij", w[:, :, u, v], g)
    gb = g.sum(axis=(1, 2))
    return gx, gw, gb
