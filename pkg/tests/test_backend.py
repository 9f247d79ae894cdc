"""Backend selection and numpy/numba kernel agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from fedqdp import _kernels, backend

HAVE_NUMBA = _kernels.round_clip_numba is not None


def test_backend_is_valid():
    assert backend.BACKEND in ("numpy", "numba")


def test_env_flag_forces_numpy():
    env = dict(os.environ, FEDQDP_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", "from fedqdp import backend; print(backend.BACKEND)"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "numpy"


def test_env_flag_rejects_unknown_value():
    env = dict(os.environ, FEDQDP_BACKEND="gpu")
    out = subprocess.run(
        [sys.executable, "-c", "from fedqdp import backend"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "FEDQDP_BACKEND" in out.stderr


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_round_clip_kernels_bit_identical():
    rng = np.random.default_rng(0)
    scaled = rng.uniform(-130, 130, size=20_000)
    scaled[:100] = np.round(scaled[:100])  # exercise exact integers
    u = rng.random(20_000)
    a = _kernels.round_clip_numpy(scaled, u, 127)
    b = _kernels.round_clip_numba(scaled, u, 127)
    assert a.dtype == b.dtype == np.int64
    assert np.array_equal(a, b)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_laplace_kernels_agree_to_ulp():
    rng = np.random.default_rng(1)
    u = rng.random(20_000) - 0.5
    for scale in (0.1, 1.0, 42.0):
        a = _kernels.laplace_from_uniform_numpy(u, scale)
        b = _kernels.laplace_from_uniform_numba(u, scale)
        # the two log implementations differ by at most ~1 ulp
        assert np.allclose(a, b, rtol=1e-14, atol=1e-300)


def test_round_clip_handles_boundary_uniform():
    # u exactly 0 rounds integers down to themselves, never up
    scaled = np.array([2.0, -2.0, 2.5])
    u = np.zeros(3)
    out = _kernels.round_clip_numpy(scaled, u, 127)
    assert np.array_equal(out, [2, -2, 3])  # frac 0.5 > u=0 rounds up


def test_laplace_kernel_boundary_is_finite():
    # |u| at the closed end of the interval must not produce inf
    u = np.array([0.5, -0.5, 0.0])
    out = _kernels.laplace_from_uniform_numpy(u, 1.0)
    assert np.all(np.isfinite(out))
    assert out[2] == 0.0
