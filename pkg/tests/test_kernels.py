import os
import subprocess
import sys

import numpy as np
import pytest

from openqid import _kernels

pytestmark = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")


def test_affine_steps_backends_agree(rng):
    M = rng.standard_normal((5, 5)) * 0.3
    v, x0 = rng.standard_normal(5), rng.standard_normal(5)
    C = rng.standard_normal((2, 5))
    a = _kernels.numba_impl.affine_steps(M, v, x0, C, 40)
    b = _kernels.numpy_impl.affine_steps(M, v, x0, C, 40)
    assert a.shape == (2, 41)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    assert np.allclose(a[:, 0], C @ x0)


def test_rk4_backends_agree(rng):
    L = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) * 0.2
    v0 = rng.standard_normal(4).astype(complex)
    obs = np.eye(4, dtype=complex)[:2]
    a = _kernels.numba_impl.rk4_linear(L, v0, 0.01, 30, 5, obs)
    b = _kernels.numpy_impl.rk4_linear(L, v0, 0.01, 30, 5, obs)
    assert np.allclose(a, b, atol=1e-13)
    # RK4 at this step size tracks the exact exponential closely
    from scipy.linalg import expm

    exact = obs @ expm(L * 0.01 * 5 * 30) @ v0
    assert np.allclose(a[:, -1], exact, atol=1e-9)


def test_faddeev_leverrier_backends_agree(rng):
    A = rng.standard_normal((6, 6))
    p1, N1, r1 = _kernels.numba_impl.faddeev_leverrier(A)
    p2, N2, r2 = _kernels.numpy_impl.faddeev_leverrier(A)
    assert np.allclose(p1, p2) and np.allclose(N1, N2)
    assert np.allclose(p1, np.poly(A)[::-1])
    assert r1 < 1e-10 and r2 < 1e-10


def test_hankel_backends_agree(rng):
    y = rng.standard_normal((3, 30))
    rows = np.array([0, 2, 3])
    cols = np.array([0, 1, 5])
    assert np.array_equal(
        _kernels.numba_impl.hankel(y, rows, cols, 1), _kernels.numpy_impl.hankel(y, rows, cols, 1)
    )


def test_disable_flag_selects_numpy():
    env = dict(os.environ, OPENQID_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from openqid import _kernels; print(_kernels.backend())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
