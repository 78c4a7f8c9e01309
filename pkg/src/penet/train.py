"""Desk-scale training demo: undo a x0.5 darkening with plain SGD.

This stands in for end-to-end training with a detection loss. Pairs are
``(0.5 * target, target)`` with target pixels drawn iid uniform in [0, 1] from
``numpy.random.Generator(PCG64(seed))``. The loss is the mean squared error
between the unclamped network output and the target, averaged over all
elements of every pair; each step is one full-batch gradient step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autograd import GradTape, vjp
from .model import PENetParams, penet_forward, watch_params

logger = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class DarkeningTask:
    n_pairs: int = 2
    size: int = 16
    gain: float = 0.5

    def pairs(self, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
        rng = np.random.Generator(np.random.PCG64(seed))
        out = []
        for _ in range(self.n_pairs):
            target = rng.random((3, self.size, self.size)).astype(np.float32)
            out.append((np.float32(self.gain) * target, target))
        return out


def loss_and_grad(params: PENetParams, pairs) -> tuple[float, dict]:
    grads = None
    loss = 0.0
    for dark, target in pairs:
        tape = GradTape()
        watch_params(tape, params)
        out = penet_forward(dark, params, tape, clamp=False)
        diff = out - target
        n = diff.size * len(pairs)
        loss += float(np.sum(diff.astype(np.float64) ** 2)) / n
        g = vjp(tape, (2.0 / n) * diff)
        if grads is None:
            grads = g
        else:
            for k in grads:
                grads[k] += g[k]
    return loss, grads


def train_demo(params: PENetParams, task: DarkeningTask | None = None, steps: int = 200,
               lr: float = 0.01, seed: int = 42) -> list[float]:
    """Run ``steps`` SGD updates on a private copy of ``params``.

    Returns the loss before each update followed by the final loss, so the
    history always has ``steps + 1`` entries.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    task = task or DarkeningTask()
    pairs = task.pairs(seed)
    params = params.astype(np.float32)
    tensors = params.to_dict()

    history = []
    for step in range(steps + 1):
        loss, grads = loss_and_grad(params, pairs)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step} (lr={lr})")
        history.append(loss)
        logger.debug("step %d loss %.6g", step, loss)
        if step == steps:
            break
        # overflow shows up as a non-finite loss on the next step
        with np.errstate(over="ignore", invalid="ignore"):
            for name, arr in tensors.items():
                arr -= np.float32(lr) * grads[name]
    return history
