"""Command-line entry point.

Exit codes: 0 success, 1 a check failed (gradcheck, train-demo), 2 usage,
file or format errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import imageio, pyramid, weights
from .gradcheck import penet_grad_check
from .imageio import PPMFormatError
from .model import penet_forward
from .train import DarkeningTask, TrainingDiverged, train_demo
from .weights import WeightFileError

GRADCHECK_TOL = 1e-4


class UsageError(Exception):
    pass


def cmd_enhance(args) -> int:
    params = weights.load(args.weights)
    img = imageio.read_ppm(args.input)
    x = imageio.to_tensor(img)
    out = imageio.from_tensor(penet_forward(x, params))
    imageio.write_ppm(out, args.output)
    if args.verbose:
        mean_out = float(np.mean(out.to_array() / 255.0))
        print(f"mean_in={float(np.mean(img.to_array() / 255.0)):.6f} mean_out={mean_out:.6f}")
    return 0


def cmd_pyramid(args) -> int:
    x = imageio.to_tensor(imageio.read_ppm(args.input))
    if min(x.shape[1:]) < pyramid.min_size():
        raise UsageError(
            f"image is {x.shape[2]}x{x.shape[1]}; the pyramid needs at least "
            f"{pyramid.min_size()}x{pyramid.min_size()}"
        )
    pyr = pyramid.decompose(x)
    os.makedirs(args.outdir, exist_ok=True)
    # differences are signed; show them around mid-gray
    layers = [(f"L{i + 1}.ppm", d + 0.5) for i, d in enumerate(pyr.diffs)]
    layers.append(("base.ppm", pyr.base))
    for name, t in layers:
        imageio.write_ppm(imageio.from_tensor(t), os.path.join(args.outdir, name))
        print(f"{name} {t.shape[2]}x{t.shape[1]}")
    return 0


def cmd_init(args) -> int:
    params = weights.init_params(args.seed, "zero" if args.zero else "random")
    weights.save(params, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    err = penet_grad_check(args.seed)
    print(f"max_rel_err={err:.6e}")
    return 0 if err < GRADCHECK_TOL else 1


def cmd_train_demo(args) -> int:
    params = weights.init_params(args.seed, "random")
    try:
        history = train_demo(params, DarkeningTask(), args.steps, args.lr, args.seed)
    except TrainingDiverged as exc:
        print(f"penet: {exc}", file=sys.stderr)
        return 1
    # one "step,loss" row per entry, no header row
    lines = [f"{i},{loss:.9g}" for i, loss in enumerate(history)]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    return 0 if history[-1] < 0.1 * history[0] else 1


def _non_negative_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance a PPM image")
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("pyramid", help="dump Laplacian pyramid components as PPM files")
    p.add_argument("--input", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_pyramid)

    p = sub.add_parser("init", help="write a freshly initialized weight file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--zero", action="store_true", help="all-zero parameters")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-demo", aliases=["train_demo"], help="SGD on the darkening task")
    p.add_argument("--steps", type=_non_negative_int, default=200)
    p.add_argument("--lr", type=_positive_float, default=0.01)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_train_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, PPMFormatError, WeightFileError, OSError, ValueError) as exc:
        print(f"penet {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
