"""Reverse-mode differentiation over a recorded tape.

Tensors are plain ``numpy.ndarray`` objects of shape (C, H, W). Every op in
:mod:`penet.ops` accepts an optional ``tape``; when given, the op appends a
record holding its inputs, its output and a closure that maps the output
cotangent to input cotangents. Arrays are identified by ``id()``; the tape
keeps a reference to everything it records, so ids stay unique while the tape
is alive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class _Record:
    op: str
    inputs: tuple
    output: np.ndarray
    backward: Callable


@dataclass
class GradTape:
    records: list = field(default_factory=list)
    leaves: dict = field(default_factory=dict)

    def watch(self, array: np.ndarray, name: str) -> np.ndarray:
        """Register ``array`` as a leaf whose gradient :func:`vjp` reports as ``name``."""
        if name in {n for n, _ in self.leaves.values()}:
            raise ValueError(f"leaf name {name!r} already watched")
        self.leaves[id(array)] = (name, array)
        return array

    def record(self, op: str, inputs: Sequence[np.ndarray], output: np.ndarray,
               backward: Callable) -> np.ndarray:
        if any(output is x for x in inputs):
            raise ValueError(f"{op}: output aliases an input")
        self.records.append(_Record(op, tuple(inputs), output, backward))
        return output

    @property
    def output(self) -> np.ndarray:
        if not self.records:
            raise ValueError("empty tape")
        return self.records[-1].output


def vjp(tape: GradTape, seed: np.ndarray, output: np.ndarray | None = None) -> dict:
    """Vector-Jacobian product of the taped computation.

    Returns a dict mapping every watched leaf name to d<seed, output>/d leaf.
    ``output`` defaults to the result of the last recorded op. Leaves that do
    not influence the output receive zeros.
    """
    out = tape.output if output is None else output
    seed = np.asarray(seed)
    if seed.shape != out.shape:
        raise ValueError(f"seed shape {seed.shape} does not match output shape {out.shape}")

    grads = {id(out): seed.astype(out.dtype, copy=True)}
    for rec in reversed(tape.records):
        g = grads.get(id(rec.output))
        if g is None:
            continue
        for x, gx in zip(rec.inputs, rec.backward(g)):
            if gx is None:
                continue
            key = id(x)
            if key in grads:
                grads[key] = grads[key] + gx
            else:
                grads[key] = gx

    return {
        name: grads.get(key, np.zeros_like(arr))
        for key, (name, arr) in tape.leaves.items()
    }
