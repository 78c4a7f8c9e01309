"""Dense (C, H, W) tensor operators with analytic backward passes.

Each operator is a pure function of its inputs. Passing ``tape=`` records the
op so :func:`penet.autograd.vjp` can differentiate through it. Tensors are
``numpy.ndarray`` in channel-major layout; float32 on production paths and
float64 for gradient verification. Operators keep the input dtype.

Several formulas are written in difference form (``a + f * (b - a)`` rather
than ``(1 - f) * a + f * b``). The maths is identical, but constant inputs then
pass through filters, pooling and resizing bit-exactly.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ._backend import kernels
from .autograd import GradTape

LEAKY_SLOPE = 0.01

SOBEL_H = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)
SOBEL_W = SOBEL_H.T.copy()


class ConvParams(NamedTuple):
    weight: np.ndarray  # (out_channels, in_channels, k, k)
    bias: np.ndarray  # (out_channels,)

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]


def _check_tensor(x: np.ndarray, op: str) -> None:
    if x.ndim != 3:
        raise ValueError(f"{op}: expected a (C, H, W) tensor, got shape {x.shape}")


def conv2d(x: np.ndarray, p: ConvParams, tape: GradTape | None = None) -> np.ndarray:
    """Stride-1 cross-correlation with zero padding ``(k - 1) // 2``.

    ``out[o, i, j] = bias[o] + sum_{c,u,v} w[o, c, u, v] * x[c, i+u-pad, j+v-pad]``
    with the sum taken in (c, u, v) order.
    """
    _check_tensor(x, "conv2d")
    w, b = p
    if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] not in (1, 3):
        raise ValueError(f"conv2d: unsupported kernel shape {w.shape}; k must be 1 or 3")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"conv2d: weight expects {w.shape[1]} input channels, tensor has {x.shape[0]}"
        )
    if b.shape != (w.shape[0],):
        raise ValueError(f"conv2d: bias shape {b.shape} does not match {w.shape[0]} outputs")

    pad = (w.shape[2] - 1) // 2
    dtype = x.dtype
    xpad = np.ascontiguousarray(np.pad(x, ((0, 0), (pad, pad), (pad, pad))), dtype=dtype)
    wk = np.ascontiguousarray(w, dtype=dtype)
    bk = np.ascontiguousarray(b, dtype=dtype)
    out = kernels.conv2d_forward(xpad, wk, bk)

    if tape is not None:
        h, wd = x.shape[1:]

        def backward(g):
            gx, gw, gb = kernels.conv2d_backward(xpad, wk, np.ascontiguousarray(g, dtype=dtype))
            return (gx[:, pad:pad + h, pad:pad + wd],
                    gw.astype(w.dtype, copy=False), gb.astype(b.dtype, copy=False))

        tape.record("conv2d", (x, w, b), out, backward)
    return out


def _sobel(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Edge replication: constants give exactly zero, borders included.
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = x.shape[1:]
    out = np.zeros_like(x)
    if kernel is SOBEL_H:
        for v, k in enumerate((1.0, 2.0, 1.0)):
            out += k * (xp[:, 2:2 + h, v:v + w] - xp[:, 0:h, v:v + w])
    else:
        for u, k in enumerate((1.0, 2.0, 1.0)):
            out += k * (xp[:, u:u + h, 2:2 + w] - xp[:, u:u + h, 0:w])
    return out


def _sobel_transpose(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    h, w = g.shape[1:]
    gp = np.zeros((g.shape[0], h + 2, w + 2), dtype=g.dtype)
    for u in range(3):
        for v in range(3):
            k = kernel[u, v]
            if k:
                gp[:, u:u + h, v:v + w] += k * g
    # fold the replicated border back onto the edge pixels
    gp[:, 1, :] += gp[:, 0, :]
    gp[:, h, :] += gp[:, h + 1, :]
    gp[:, :, 1] += gp[:, :, 0]
    gp[:, :, w] += gp[:, :, w + 1]
    return gp[:, 1:h + 1, 1:w + 1].copy()


def depthwise_sobel(x: np.ndarray, tape: GradTape | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel vertical and horizontal Sobel responses ``(Sobel_h(x), Sobel_w(x))``.

    ``Sobel_h = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]`` responds to changes down
    the rows; ``Sobel_w`` is its transpose. Kernels are fixed. Borders are
    padded by edge replication.
    """
    _check_tensor(x, "depthwise_sobel")
    sh = _sobel(x, SOBEL_H)
    sw = _sobel(x, SOBEL_W)
    if tape is not None:
        tape.record("sobel_h", (x,), sh, lambda g: (_sobel_transpose(g, SOBEL_H),))
        tape.record("sobel_w", (x,), sw, lambda g: (_sobel_transpose(g, SOBEL_W),))
    return sh, sw


def leaky_relu(x: np.ndarray, tape: GradTape | None = None) -> np.ndarray:
    slope = x.dtype.type(LEAKY_SLOPE)
    mask = x >= 0
    out = np.where(mask, x, slope * x)
    if tape is not None:
        tape.record("leaky_relu", (x,), out, lambda g: (np.where(mask, g, slope * g),))
    return out


def softmax_spatial(x: np.ndarray, tape: GradTape | None = None) -> np.ndarray:
    """Softmax over the H*W positions of each channel, max-shifted for stability."""
    _check_tensor(x, "softmax_spatial")
    m = x.max(axis=(1, 2), keepdims=True)
    e = np.exp(x - m)
    out = e / e.sum(axis=(1, 2), keepdims=True)
    if tape is not None:
        def backward(g):
            dot = (g * out).sum(axis=(1, 2), keepdims=True)
            return (out * (g - dot),)

        tape.record("softmax_spatial", (x,), out, backward)
    return out


def _bins(n: int, s: int) -> list[tuple[int, int]]:
    # [floor(i*n/s), ceil((i+1)*n/s)) in exact integer arithmetic
    return [((i * n) // s, -((-(i + 1) * n) // s)) for i in range(s)]


def adaptive_avg_pool(x: np.ndarray, s: int, tape: GradTape | None = None) -> np.ndarray:
    """Average-pool each channel to ``s x s`` with floor/ceil bin edges (bins may overlap)."""
    _check_tensor(x, "adaptive_avg_pool")
    if int(s) != s or s < 1:
        raise ValueError(f"adaptive_avg_pool: output size must be >= 1, got {s}")
    s = int(s)
    rows, cols = _bins(x.shape[1], s), _bins(x.shape[2], s)
    out = np.empty((x.shape[0], s, s), dtype=x.dtype)
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            cell = x[:, r0:r1, c0:c1]
            first = cell[:, :1, :1]
            out[:, i, j] = (first + (cell - first).mean(axis=(1, 2), keepdims=True))[:, 0, 0]

    if tape is not None:
        def backward(g):
            gx = np.zeros_like(x)
            for i, (r0, r1) in enumerate(rows):
                for j, (c0, c1) in enumerate(cols):
                    n = (r1 - r0) * (c1 - c0)
                    gx[:, r0:r1, c0:c1] += (g[:, i, j] / n)[:, None, None]
            return (gx,)

        tape.record("adaptive_avg_pool", (x,), out, backward)
    return out


def _lerp_table(n_in: int, n_out: int, dtype) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres, clamped to the valid source range
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = (src - i0).astype(dtype)
    return i0, i1, frac


def bilinear_resize(x: np.ndarray, out_h: int, out_w: int,
                    tape: GradTape | None = None) -> np.ndarray:
    """Bilinear resampling with half-pixel centres (align_corners=False) and edge clamping."""
    _check_tensor(x, "bilinear_resize")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bilinear_resize: target size must be positive, got {out_h}x{out_w}")
    r0, r1, fy = _lerp_table(x.shape[1], out_h, x.dtype)
    c0, c1, fx = _lerp_table(x.shape[2], out_w, x.dtype)

    top = x[:, r0, :]
    rows = top + fy[None, :, None] * (x[:, r1, :] - top)
    left = rows[:, :, c0]
    out = left + fx[None, None, :] * (rows[:, :, c1] - left)

    if tape is not None:
        def backward(g):
            grows = np.zeros_like(rows)
            np.add.at(grows, (slice(None), slice(None), c0), g * (1 - fx))
            np.add.at(grows, (slice(None), slice(None), c1), g * fx)
            gx = np.zeros_like(x)
            np.add.at(gx, (slice(None), r0, slice(None)), grows * (1 - fy)[None, :, None])
            np.add.at(gx, (slice(None), r1, slice(None)), grows * fy[None, :, None])
            return (gx,)

        tape.record("bilinear_resize", (x,), out, backward)
    return out


def elementwise(a: np.ndarray, b: np.ndarray, kind: str,
                tape: GradTape | None = None) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"elementwise {kind}: shape mismatch {a.shape} vs {b.shape}")
    if kind == "add":
        out = a + b
        backward = lambda g: (g, g)  # noqa: E731
    elif kind == "mul":
        out = a * b
        backward = lambda g: (g * b, g * a)  # noqa: E731
    else:
        raise ValueError(f"elementwise: unknown kind {kind!r}")
    if tape is not None:
        tape.record(kind, (a, b), out, backward)
    return out


def add(a, b, tape=None):
    return elementwise(a, b, "add", tape)


def mul(a, b, tape=None):
    return elementwise(a, b, "mul", tape)


def scale(a: np.ndarray, k: float, tape: GradTape | None = None) -> np.ndarray:
    k = a.dtype.type(k)
    out = a * k
    if tape is not None:
        tape.record("scale", (a,), out, lambda g: (g * k,))
    return out


def channel_split(x: np.ndarray, group_sizes: Sequence[int],
                  tape: GradTape | None = None) -> list[np.ndarray]:
    _check_tensor(x, "channel_split")
    if any(n < 1 for n in group_sizes) or sum(group_sizes) != x.shape[0]:
        raise ValueError(
            f"channel_split: groups {list(group_sizes)} do not partition {x.shape[0]} channels"
        )
    parts, start = [], 0
    for n in group_sizes:
        part = x[start:start + n].copy()
        if tape is not None:
            def backward(g, start=start, n=n):
                gx = np.zeros_like(x)
                gx[start:start + n] = g
                return (gx,)

            tape.record("channel_split", (x,), part, backward)
        parts.append(part)
        start += n
    return parts


def channel_concat(parts: Sequence[np.ndarray], tape: GradTape | None = None) -> np.ndarray:
    if not parts:
        raise ValueError("channel_concat: nothing to concatenate")
    hw = parts[0].shape[1:]
    for p in parts:
        _check_tensor(p, "channel_concat")
        if p.shape[1:] != hw:
            raise ValueError(f"channel_concat: spatial dims differ ({p.shape[1:]} vs {hw})")
    out = np.concatenate(parts, axis=0)
    if tape is not None:
        bounds = np.cumsum([0] + [p.shape[0] for p in parts])

        def backward(g):
            return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

        tape.record("channel_concat", tuple(parts), out, backward)
    return out
