"""Kernel backend selection.

The compiled extension is used when it imports; ``PENET_BACKEND=python``
forces the numpy fallback (useful for benchmarking and for cross-checks).
"""

import os

from . import _pykernels

_requested = os.environ.get("PENET_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels

NAME = "cython" if kernels is not _pykernels else "python"
