"""Gaussian / Laplacian pyramid with exact reconstruction.

``G1`` is the image and ``G{i+1} = down(blur(G{i}))``. Each difference layer is
``L{i} = G{i} - up(G{i+1})`` where ``up`` is bilinear resampling to the recorded
size of ``G{i}``, so odd sizes reconstruct exactly. The coarsest Gaussian level
is kept as the base.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autograd import GradTape

LEVELS = 4

_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0])
GAUSSIAN_KERNEL = np.outer(_BINOMIAL, _BINOMIAL) / 256.0


@dataclass
class LaplacianPyramid:
    diffs: list  # [L1, L2, L3], finest first
    base: np.ndarray  # coarsest Gaussian level
    level_dims: list  # (h, w) of G1..G4

    @property
    def components(self) -> list:
        return [*self.diffs, self.base]


def _reflect_index(n: int, pad: int) -> np.ndarray:
    return np.pad(np.arange(n), pad, mode="reflect")


def gaussian_downsample(x: np.ndarray, tape: GradTape | None = None) -> np.ndarray:
    """5x5 binomial blur with reflect padding, then keep even rows and columns."""
    if x.ndim != 3:
        raise ValueError(f"gaussian_downsample: expected (C, H, W), got {x.shape}")
    h, w = x.shape[1:]
    if h < 2 or w < 2:
        raise ValueError(f"gaussian_downsample: need height and width >= 2, got {h}x{w}")
    ridx, cidx = _reflect_index(h, 2), _reflect_index(w, 2)
    xp = x[:, ridx][:, :, cidx]
    oh, ow = (h + 1) // 2, (w + 1) // 2
    kern = GAUSSIAN_KERNEL.astype(x.dtype)

    # centre + sum k * (neighbour - centre): the kernel sums to one, and
    # constant images come through unchanged to the last bit
    centre = xp[:, 2:2 + 2 * oh:2, 2:2 + 2 * ow:2]
    acc = np.zeros_like(centre)
    for u in range(5):
        for v in range(5):
            if u == 2 and v == 2:
                continue
            acc += kern[u, v] * (xp[:, u:u + 2 * oh:2, v:v + 2 * ow:2] - centre)
    out = centre + acc

    if tape is not None:
        def backward(g):
            gp = np.zeros_like(xp)
            for u in range(5):
                for v in range(5):
                    gp[:, u:u + 2 * oh:2, v:v + 2 * ow:2] += kern[u, v] * g
            gr = np.zeros((x.shape[0], h, gp.shape[2]), dtype=x.dtype)
            np.add.at(gr, (slice(None), ridx), gp)
            gx = np.zeros_like(x)
            np.add.at(gx, (slice(None), slice(None), cidx), gr)
            return (gx,)

        tape.record("gaussian_downsample", (x,), out, backward)
    return out


def min_size(levels: int = LEVELS) -> int:
    return 2 ** (levels - 1)


def decompose(image: np.ndarray, levels: int = LEVELS,
              tape: GradTape | None = None) -> LaplacianPyramid:
    if levels != LEVELS:
        raise ValueError(f"decompose: only {LEVELS} levels are supported, got {levels}")
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"decompose: expected a 3-channel image, got shape {image.shape}")
    h, w = image.shape[1:]
    if min(h, w) < min_size(levels):
        raise ValueError(
            f"decompose: image is {h}x{w}; {levels} levels need at least "
            f"{min_size(levels)}x{min_size(levels)}"
        )
    gauss = [image]
    for _ in range(levels - 1):
        gauss.append(gaussian_downsample(gauss[-1], tape))
    diffs = []
    for fine, coarse in zip(gauss[:-1], gauss[1:]):
        up = ops.bilinear_resize(coarse, fine.shape[1], fine.shape[2], tape)
        diffs.append(ops.add(fine, ops.scale(up, -1.0, tape), tape))
    return LaplacianPyramid(diffs, gauss[-1], [g.shape[1:] for g in gauss])


def reconstruct(pyr: LaplacianPyramid, tape: GradTape | None = None) -> np.ndarray:
    dims = [tuple(d) for d in pyr.level_dims]
    if len(dims) != len(pyr.diffs) + 1:
        raise ValueError(f"reconstruct: {len(dims)} level dims for {len(pyr.diffs)} diffs")
    if pyr.base.shape[1:] != dims[-1]:
        raise ValueError(
            f"reconstruct: base is {pyr.base.shape[1:]}, level {len(dims)} expects {dims[-1]}"
        )
    for i, d in enumerate(pyr.diffs):
        if d.shape[1:] != dims[i]:
            raise ValueError(f"reconstruct: L{i + 1} is {d.shape[1:]}, expected {dims[i]}")
        if i + 1 < len(dims) and dims[i + 1] != ((dims[i][0] + 1) // 2, (dims[i][1] + 1) // 2):
            raise ValueError(f"reconstruct: level {i + 2} dims {dims[i + 1]} are not half of {dims[i]}")

    g = pyr.base
    for i in reversed(range(len(pyr.diffs))):
        h, w = dims[i]
        g = ops.add(pyr.diffs[i], ops.bilinear_resize(g, h, w, tape), tape)
    return g
