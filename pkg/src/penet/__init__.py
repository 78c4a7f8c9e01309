"""Pyramid enhancement network for low-light images.

Numpy implementation with hand-written backward passes; convolutions run in
a compiled extension when it is available (see :data:`BACKEND`).
"""

from ._backend import NAME as BACKEND
from .autograd import GradTape, vjp
from .gradcheck import grad_check
from .model import PENetParams, penet_forward, zero_params
from .pyramid import LaplacianPyramid, decompose, reconstruct
from .train import train_demo
from .weights import init_params, load, save

__all__ = [
    "BACKEND", "GradTape", "vjp", "grad_check", "PENetParams", "penet_forward",
    "zero_params", "LaplacianPyramid", "decompose", "reconstruct", "train_demo",
    "init_params", "load", "save",
]
