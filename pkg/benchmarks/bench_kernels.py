"""Time the compiled and numpy convolution kernels on network-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--size S]
"""

import argparse
import timeit

import numpy as np

from penet import _pykernels

try:
    from penet import _ckernels
except ImportError:
    _ckernels = None


def _inputs(c_in, c_out, size, dtype, seed=0):
    rng = np.random.default_rng(seed)
    xpad = rng.standard_normal((c_in, size + 2, size + 2)).astype(dtype)
    w = rng.standard_normal((c_out, c_in, 3, 3)).astype(dtype)
    b = rng.standard_normal(c_out).astype(dtype)
    g = rng.standard_normal((c_out, size, size)).astype(dtype)
    return xpad, w, b, g


def bench(mod, xpad, w, b, g, repeat):
    fwd = min(timeit.repeat(lambda: mod.conv2d_forward(xpad, w, b), number=1, repeat=repeat))
    bwd = min(timeit.repeat(lambda: mod.conv2d_backward(xpad, w, g), number=1, repeat=repeat))
    return fwd, bwd


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=64)
    args = parser.parse_args(argv)

    backends = [("numpy", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    print(f"{'layer':>10} {'dtype':>8} {'backend':>8} {'forward ms':>11} {'backward ms':>12}")
    for c_in, c_out in ((3, 32), (32, 32), (32, 3)):
        for dtype in (np.float32, np.float64):
            arrays = _inputs(c_in, c_out, args.size, dtype)
            for name, mod in backends:
                fwd, bwd = bench(mod, *arrays, args.repeat)
                print(f"{f'{c_in}->{c_out}':>10} {np.dtype(dtype).name:>8} {name:>8} "
                      f"{1e3 * fwd:11.2f} {1e3 * bwd:12.2f}")


if __name__ == "__main__":
    main()
