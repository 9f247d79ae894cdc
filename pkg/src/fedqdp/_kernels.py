"""Hot elementwise kernels in pure numpy and, when available, numba.

Both variants consume pre-drawn uniforms rather than drawing inside the
kernel, so quantization codes are bit-identical across backends. The
Laplace transform can differ from the numpy result by about one ulp
because the two paths use different log implementations.
"""

from __future__ import annotations

import numpy as np

# smallest positive normal float, keeps log() off exact zero at |u| = 0.5
_LAPLACE_FLOOR = np.finfo(np.float64).tiny


def round_clip_numpy(scaled: np.ndarray, u: np.ndarray, bound: int) -> np.ndarray:
    """Stochastically round pre-scaled values and clip into [-bound, bound].

    Rounds down when the uniform draw u >= the fractional part, up
    otherwise, so the expected value of the code equals the input.
    """
    lower = np.floor(scaled)
    codes = lower + (u < scaled - lower)
    return np.clip(codes, -float(bound), float(bound)).astype(np.int64)


def laplace_from_uniform_numpy(u: np.ndarray, scale: float) -> np.ndarray:
    """Map uniforms on (-1/2, 1/2) to Laplace(0, scale) via the inverse CDF."""
    inner = np.maximum(1.0 - 2.0 * np.abs(u), _LAPLACE_FLOOR)
    return -scale * np.sign(u) * np.log(inner)


try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba installed
    njit = None


if njit is not None:

    @njit(cache=True)
    def round_clip_numba(scaled, u, bound):
        out = np.empty(scaled.size, dtype=np.int64)
        hi = np.int64(bound)
        for i in range(scaled.size):
            lower = np.floor(scaled[i])
            code = np.int64(lower)
            if u[i] < scaled[i] - lower:
                code += 1
            if code > hi:
                code = hi
            elif code < -hi:
                code = -hi
            out[i] = code
        return out

    @njit(cache=True)
    def laplace_from_uniform_numba(u, scale):
        out = np.empty(u.size, dtype=np.float64)
        for i in range(u.size):
            inner = 1.0 - 2.0 * abs(u[i])
            if inner < _LAPLACE_FLOOR:
                inner = _LAPLACE_FLOOR
            if u[i] > 0.0:
                sign = 1.0
            elif u[i] < 0.0:
                sign = -1.0
            else:
                sign = 0.0
            out[i] = -scale * sign * np.log(inner)
        return out

else:  # pragma: no cover
    round_clip_numba = None
    laplace_from_uniform_numba = None
