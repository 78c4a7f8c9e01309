"""Central finite-difference oracle for analytic gradients.

The oracle only ever calls forward code. :func:`check_vjp` runs the analytic
backward pass at float64 and evaluates the finite differences with the same
forward functions in ``numpy.longdouble`` (80-bit extended on x86-64), which
keeps the round-off of a 1e-5 step well below the smallest gradients a
32-channel network produces.
"""

from __future__ import annotations

import logging
from typing import Callable, Mapping

import numpy as np

from .autograd import GradTape, vjp

logger = logging.getLogger(__name__)

ORACLE_DTYPE = np.longdouble


class GradCheckError(ArithmeticError):
    """The checked function returned a non-finite value."""


class KinkCrossed(ArithmeticError):
    """A perturbation moved a leaky-ReLU input across zero.

    The central difference then averages two slopes and says nothing about
    the derivative; callers should move to another test point.
    """


def _kink_signature(tape: GradTape) -> bytes:
    masks = [np.packbits(rec.inputs[0] >= 0).tobytes()
             for rec in tape.records if rec.op == "leaky_relu"]
    return b"|".join(masks)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def numeric_grad(f: Callable, params: Mapping[str, np.ndarray], name: str, index: tuple,
                 eps: float = 1e-5) -> float:
    """Central difference of ``f`` in one scalar entry of ``params[name]``.

    ``f`` may return a scalar or an array; for arrays the scalar function is
    the sum of the entries and the two evaluations are differenced
    elementwise before summing, which avoids cancellation in the total.
    The entry is restored afterwards.
    """
    arr = params[name]
    orig = arr[index].copy()
    try:
        arr[index] = orig + eps
        fp = np.asarray(f(params))
        arr[index] = orig - eps
        fm = np.asarray(f(params))
    finally:
        arr[index] = orig
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise GradCheckError(f"non-finite function value while perturbing {name}{[int(i) for i in index]}")
    return float(np.sum(fp - fm) / (2 * eps))


def grad_check(f: Callable, grad, params: Mapping[str, np.ndarray], eps: float = 1e-5,
               max_entries: int | None = None, seed: int = 0) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Parameters
    ----------
    f
        Function of the named arrays in ``params`` returning a scalar, or an
        array whose sum is the scalar. Arrays are perturbed in place, so ``f``
        must read them on every call.
    grad
        Analytic gradients keyed like ``params``, or a callable producing them
        from ``params``.
    params
        Named floating-point arrays.
    eps
        Finite-difference step.
    max_entries
        If set, at most this many entries per array are checked, drawn without
        replacement from a generator seeded with ``seed``. ``None`` checks every
        scalar.

    Returns
    -------
    float
        ``max |a - n| / max(|a|, |n|, 1e-8)`` over all checked entries.

    Raises
    ------
    GradCheckError
        If ``f`` is non-finite at the base point or at any perturbation.
    """
    if callable(grad):
        grad = grad(params)
    if not np.all(np.isfinite(np.asarray(f(params)))):
        raise GradCheckError("non-finite function value at the base point")

    rng = np.random.default_rng(seed)
    worst, worst_at = 0.0, None
    for name, arr in params.items():
        g = np.asarray(grad[name])
        if g.shape != arr.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {arr.shape}")
        flat = np.arange(arr.size)
        if max_entries is not None and arr.size > max_entries:
            flat = np.sort(rng.choice(arr.size, size=max_entries, replace=False))
        for k in flat:
            index = np.unravel_index(k, arr.shape)
            err = relative_error(float(g[index]), numeric_grad(f, params, name, index, eps))
            if err > worst:
                worst, worst_at = err, (name, index)
    if worst_at is not None:
        logger.debug("worst relative error %.3e at %s%s", worst, worst_at[0], [int(i) for i in worst_at[1]])
    return worst


def check_vjp(fn: Callable, arrays: Mapping[str, np.ndarray], seed: int = 0,
              eps: float = 1e-5, max_entries: int | None = None) -> float:
    """Finite-difference check of a taped function ``fn(arrays, tape) -> tensor``.

    The scalar under test is ``<r, fn(arrays)>`` for a cotangent ``r`` drawn
    from ``seed``. Analytic gradients come from :func:`vjp` at float64.

    Raises
    ------
    KinkCrossed
        If any perturbation flips the sign pattern of a leaky-ReLU input.
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in arrays.items()}
    tape = GradTape()
    for name, arr in base.items():
        tape.watch(arr, name)
    out = fn(base, tape)
    r = np.random.default_rng(seed).uniform(-1.0, 1.0, size=out.shape)
    grads = vjp(tape, r, out)

    wide = {k: v.astype(ORACLE_DTYPE) for k, v in base.items()}
    r_wide = r.astype(ORACLE_DTYPE)
    probe = GradTape()
    fn(wide, probe)
    reference = _kink_signature(probe)

    def f(a):
        t = GradTape()
        out = fn(a, t)
        if _kink_signature(t) != reference:
            raise KinkCrossed("finite-difference step crossed a leaky-ReLU kink")
        return r_wide * out

    return grad_check(f, grads, wide, eps=eps, max_entries=max_entries, seed=seed)


def penet_grad_check(seed: int = 0, size: int = 8, max_entries: int | None = 4,
                     attempts: int = 10) -> float:
    """Finite-difference check of the whole unclamped network.

    Uses random initial weights for ``seed`` with biases jittered in
    [-0.1, 0.1] (so bias paths are not checked only at zero) and a random
    ``3 x size x size`` input. ``max_entries`` caps the entries checked per
    tensor; the input image counts as a tensor named ``"input"``. If a step
    crosses a leaky-ReLU kink, biases and input are redrawn from the same
    generator, up to ``attempts`` times.
    """
    from .model import PENetParams, penet_forward
    from .weights import init_params

    rng = np.random.default_rng(seed)
    start = init_params(seed, "random").astype(np.float64)

    def fn(a, tape):
        p = PENetParams.from_dict({k: v for k, v in a.items() if k != "input"})
        return penet_forward(a["input"], p, tape, clamp=False)

    for attempt in range(attempts):
        params = start.map(lambda a: a + rng.uniform(-0.1, 0.1, a.shape) if a.ndim == 1 else a)
        arrays = params.to_dict()
        arrays["input"] = rng.random((3, size, size))
        try:
            return check_vjp(fn, arrays, seed=seed, max_entries=max_entries)
        except KinkCrossed:
            logger.info("seed %d attempt %d crossed a kink; redrawing", seed, attempt)
    raise KinkCrossed(f"seed {seed}: every one of {attempts} test points crossed a kink")
