"""Pyramid enhancement network.

The image is split into three Laplacian differences and a coarse base. Every
component goes through its own copy of three parallel branches, whose outputs
are summed:

* context branch: residual block 3->32, spatial-softmax attention with
  residual correction, residual block 32->3,
* edge branch: fixed Sobel responses refined by a 3x3 conv, plus the input,
* low-frequency filter: 3->32 conv, four 8-channel groups average-pooled to
  1, 2, 3 and 6 cells and resized back, then a 32->3 conv.

The enhanced components are then recombined by pyramid reconstruction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import ops, pyramid
from .autograd import GradTape
from .ops import ConvParams

WIDTH = 32
POOL_SIZES = (1, 2, 3, 6)
MIN_IMAGE_SIZE = 8


@dataclass
class ResidualBlockParams:
    conv_a: ConvParams
    conv_b: ConvParams
    proj: Optional[ConvParams] = None  # 1x1, only when channels change


@dataclass
class ContextBranchParams:
    rb1: ResidualBlockParams
    f1: ConvParams
    f2: ConvParams
    rb2: ResidualBlockParams


@dataclass
class EdgeBranchParams:
    f3: ConvParams


@dataclass
class LEFParams:
    conv_in: ConvParams
    conv_out: ConvParams


@dataclass
class LevelParams:
    cb: ContextBranchParams
    eb: EdgeBranchParams
    lef: LEFParams


@dataclass
class PENetParams:
    levels: list  # four LevelParams, finest component first

    def named_tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield ``(name, array)`` in canonical order, e.g. ``level0.cb.rb1.conv_a.weight``."""
        for i, level in enumerate(self.levels):
            yield from _walk(level, f"level{i}")

    def to_dict(self) -> dict:
        return dict(self.named_tensors())

    def map(self, fn) -> "PENetParams":
        """New parameter set with ``fn`` applied to every array."""
        return PENetParams([_map(level, fn) for level in self.levels])

    def astype(self, dtype) -> "PENetParams":
        return self.map(lambda a: np.array(a, dtype=dtype))

    def copy(self) -> "PENetParams":
        return self.map(np.copy)

    @classmethod
    def from_dict(cls, tensors: dict) -> "PENetParams":
        """Rebuild from a name -> array mapping; names and shapes must match the schema."""
        expected = dict(param_schema())
        for name in tensors:
            if name not in expected:
                raise KeyError(f"unexpected tensor {name!r}")
        for name, shape in expected.items():
            if name not in tensors:
                raise KeyError(f"missing tensor {name!r}")
            if tuple(tensors[name].shape) != shape:
                raise ValueError(
                    f"tensor {name!r} has shape {tuple(tensors[name].shape)}, expected {shape}"
                )
        it = iter(tensors[name] for name in expected)
        return _template().map(lambda _: next(it))


def _walk(node, prefix: str):
    if isinstance(node, ConvParams):
        yield f"{prefix}.weight", node.weight
        yield f"{prefix}.bias", node.bias
        return
    for f in dataclasses.fields(node):
        child = getattr(node, f.name)
        if child is not None:
            yield from _walk(child, f"{prefix}.{f.name}")


def _map(node, fn):
    if isinstance(node, ConvParams):
        return ConvParams(fn(node.weight), fn(node.bias))
    return dataclasses.replace(node, **{
        f.name: _map(getattr(node, f.name), fn)
        for f in dataclasses.fields(node) if getattr(node, f.name) is not None
    })


def _conv(c_in: int, c_out: int, k: int = 3, dtype=np.float32) -> ConvParams:
    return ConvParams(np.zeros((c_out, c_in, k, k), dtype), np.zeros(c_out, dtype))


def _block(c_in: int, c_out: int, dtype) -> ResidualBlockParams:
    proj = _conv(c_in, c_out, 1, dtype) if c_in != c_out else None
    return ResidualBlockParams(_conv(c_in, c_out, 3, dtype), _conv(c_out, c_out, 3, dtype), proj)


def _level(dtype) -> LevelParams:
    return LevelParams(
        cb=ContextBranchParams(
            rb1=_block(3, WIDTH, dtype),
            f1=_conv(WIDTH, WIDTH, 3, dtype),
            f2=_conv(WIDTH, WIDTH, 3, dtype),
            rb2=_block(WIDTH, 3, dtype),
        ),
        eb=EdgeBranchParams(f3=_conv(3, 3, 3, dtype)),
        lef=LEFParams(conv_in=_conv(3, WIDTH, 3, dtype), conv_out=_conv(WIDTH, 3, 3, dtype)),
    )


def _template(dtype=np.float32) -> PENetParams:
    return PENetParams([_level(dtype) for _ in range(pyramid.LEVELS)])


def zero_params(dtype=np.float32) -> PENetParams:
    return _template(dtype)


def param_schema() -> list[tuple[str, tuple]]:
    """Every tensor name with its shape, in canonical (file) order."""
    return [(name, a.shape) for name, a in _template().named_tensors()]


def watch_params(tape: GradTape, params: PENetParams) -> None:
    for name, arr in params.named_tensors():
        tape.watch(arr, name)


# forward pass


def _require_channels(x: np.ndarray, c: int, op: str) -> None:
    if x.ndim != 3 or x.shape[0] != c:
        raise ValueError(f"{op}: expected {c} channels, got tensor of shape {x.shape}")


def _embed_channels(x: np.ndarray, c_out: int, tape: GradTape | None) -> np.ndarray:
    # fixed identity embedding: zero-extend when widening, keep leading channels when narrowing
    c_in = x.shape[0]
    if c_out > c_in:
        pad = np.zeros((c_out - c_in, *x.shape[1:]), dtype=x.dtype)
        return ops.channel_concat([x, pad], tape)
    return ops.channel_split(x, [c_out, c_in - c_out], tape)[0]


def residual_block(x: np.ndarray, p: ResidualBlockParams,
                   tape: GradTape | None = None) -> np.ndarray:
    """``conv_b(lrelu(conv_a(x))) + shortcut(x)``.

    When channels change the shortcut is a fixed identity embedding of ``x``
    plus the learned 1x1 projection, so a block whose convolutions are all
    zero is the identity on the shared channels.
    """
    c_in, c_out = p.conv_a.in_channels, p.conv_b.out_channels
    _require_channels(x, c_in, "residual_block")
    y = ops.conv2d(ops.leaky_relu(ops.conv2d(x, p.conv_a, tape), tape), p.conv_b, tape)
    if c_in == c_out:
        return ops.add(y, x, tape)
    if p.proj is None:
        raise ValueError(f"residual_block: {c_in}->{c_out} block needs a projection")
    shortcut = ops.add(_embed_channels(x, c_out, tape), ops.conv2d(x, p.proj, tape), tape)
    return ops.add(y, shortcut, tape)


def context_branch(x: np.ndarray, p: ContextBranchParams,
                   tape: GradTape | None = None) -> np.ndarray:
    _require_channels(x, 3, "context_branch")
    t = residual_block(x, p.rb1, tape)
    attn = ops.softmax_spatial(ops.conv2d(t, p.f2, tape), tape)
    x_hat = ops.mul(attn, t, tape)
    u = ops.add(t, ops.leaky_relu(ops.conv2d(x_hat, p.f1, tape), tape), tape)
    return residual_block(u, p.rb2, tape)


def edge_branch(x: np.ndarray, p: EdgeBranchParams, tape: GradTape | None = None) -> np.ndarray:
    _require_channels(x, 3, "edge_branch")
    sh, sw = ops.depthwise_sobel(x, tape)
    return ops.add(ops.conv2d(ops.add(sh, sw, tape), p.f3, tape), x, tape)


def lef(x: np.ndarray, p: LEFParams, tape: GradTape | None = None) -> np.ndarray:
    _require_channels(x, 3, "lef")
    f = ops.conv2d(x, p.conv_in, tape)
    n = f.shape[0]
    if n % len(POOL_SIZES):
        raise ValueError(f"lef: {n} channels cannot be split into {len(POOL_SIZES)} groups")
    h, w = x.shape[1:]
    groups = ops.channel_split(f, [n // len(POOL_SIZES)] * len(POOL_SIZES), tape)
    filtered = [
        ops.bilinear_resize(ops.adaptive_avg_pool(g, s, tape), h, w, tape)
        for g, s in zip(groups, POOL_SIZES)
    ]
    return ops.conv2d(ops.channel_concat(filtered, tape), p.conv_out, tape)


def enhance_component(x: np.ndarray, p: LevelParams, tape: GradTape | None = None) -> np.ndarray:
    cb = context_branch(x, p.cb, tape)
    eb = edge_branch(x, p.eb, tape)
    return ops.add(ops.add(cb, eb, tape), lef(x, p.lef, tape), tape)


def penet_forward(image: np.ndarray, params: PENetParams, tape: GradTape | None = None,
                  clamp: bool = True) -> np.ndarray:
    """Enhance a 3xHxW image with values in [0, 1].

    With ``clamp=False`` the raw reconstruction is returned; that is the
    differentiable output used for gradients and training.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"penet_forward: expected a 3xHxW image, got shape {image.shape}")
    if min(image.shape[1:]) < MIN_IMAGE_SIZE:
        raise ValueError(
            f"penet_forward: image is {image.shape[1]}x{image.shape[2]}, "
            f"minimum is {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}"
        )
    if len(params.levels) != pyramid.LEVELS:
        raise ValueError(f"penet_forward: need {pyramid.LEVELS} level parameter sets")
    pyr = pyramid.decompose(image, tape=tape)
    enhanced = [enhance_component(c, lp, tape) for c, lp in zip(pyr.components, params.levels)]
    out = pyramid.reconstruct(
        pyramid.LaplacianPyramid(enhanced[:-1], enhanced[-1], pyr.level_dims), tape
    )
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out
