"""Kernel backend selection.

FEDQDP_BACKEND=numpy forces the pure-numpy kernels (no jit warmup, handy
for benchmarking and for machines without a working numba). FEDQDP_BACKEND=numba
requires the jit path and fails loudly if numba is missing. Unset, numba is
used when importable.
"""

from __future__ import annotations

import os

from fedqdp import _kernels

_CHOICES = ("numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get("FEDQDP_BACKEND", "").strip().lower()
    if requested and requested not in _CHOICES:
        raise ValueError(f"FEDQDP_BACKEND must be one of {_CHOICES}, got {requested!r}")
    if requested == "numpy":
        return "numpy"
    if _kernels.round_clip_numba is None:
        if requested == "numba":
            raise RuntimeError("FEDQDP_BACKEND=numba but numba is not importable")
        return "numpy"
    return "numba"


BACKEND = _resolve()

if BACKEND == "numba":
    round_clip = _kernels.round_clip_numba
    laplace_from_uniform = _kernels.laplace_from_uniform_numba
else:
    round_clip = _kernels.round_clip_numpy
    laplace_from_uniform = _kernels.laplace_from_uniform_numpy
