"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a loop-style body that numba compiles, and a
vectorised numpy body used when numba is missing or when the environment
variable ``OPENQID_DISABLE_NUMBA=1`` is set. The public names at module
level dispatch to whichever backend is active; ``numba_impl`` and
``numpy_impl`` expose both for benchmarking and cross-checks.
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("OPENQID_DISABLE_NUMBA", "0") != "1"


# ---------------------------------------------------------------------------
# loop bodies (numba targets)


def _affine_steps_loop(M, v, x0, C, n_steps):
    K = x0.shape[0]
    p = C.shape[0]
    out = np.empty((p, n_steps + 1))
    x = x0.copy()
    xn = np.empty(K)
    for j in range(n_steps + 1):
        for i in range(p):
            acc = 0.0
            for q in range(K):
                acc += C[i, q] * x[q]
            out[i, j] = acc
        if j == n_steps:
            break
        for i in range(K):
            acc = v[i]
            for q in range(K):
                acc += M[i, q] * x[q]
            xn[i] = acc
        for i in range(K):
            x[i] = xn[i]
    return out


def _rk4_linear_loop(L, v0, h, n_steps, substeps, obs):
    n = v0.shape[0]
    p = obs.shape[0]
    out = np.empty((p, n_steps + 1), dtype=np.complex128)
    v = v0.copy()
    ks = np.empty((4, n), dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    coef = (0.5, 0.5, 1.0)
    for j in range(n_steps + 1):
        for i in range(p):
            acc = 0.0 + 0.0j
            for q in range(n):
                acc += obs[i, q] * v[q]
            out[i, j] = acc
        if j == n_steps:
            break
        for _ in range(substeps):
            for i in range(n):
                tmp[i] = v[i]
            for stage in range(4):
                for i in range(n):
                    acc = 0.0 + 0.0j
                    for q in range(n):
                        acc += L[i, q] * tmp[q]
                    ks[stage, i] = acc
                if stage < 3:
                    for i in range(n):
                        tmp[i] = v[i] + coef[stage] * h * ks[stage, i]
            for i in range(n):
                v[i] += h / 6.0 * (ks[0, i] + 2.0 * ks[1, i] + 2.0 * ks[2, i] + ks[3, i])
    return out


def _faddeev_leverrier_loop(A):
    K = A.shape[0]
    p = np.zeros(K + 1)
    p[K] = 1.0
    N = np.zeros((K, K, K))
    for i in range(K):
        N[K - 1, i, i] = 1.0
    AN = np.empty((K, K))
    for k in range(K - 1, -1, -1):
        for i in range(K):
            for q in range(K):
                acc = 0.0
                for r in range(K):
                    acc += A[i, r] * N[k, r, q]
                AN[i, q] = acc
        tr = 0.0
        for i in range(K):
            tr += AN[i, i]
        p[k] = -tr / (K - k)
        if k > 0:
            for i in range(K):
                for q in range(K):
                    N[k - 1, i, q] = AN[i, q]
                N[k - 1, i, i] += p[k]
    # residual of the Cayley-Hamilton closure A N_0 + p_0 I = 0
    for i in range(K):
        AN[i, i] += p[0]
    res = 0.0
    for i in range(K):
        for q in range(K):
            a = abs(AN[i, q])
            res = max(res, a)
    return p, N, res


def _hankel_loop(y, rows, cols, k):
    p = y.shape[0]
    r = rows.shape[0]
    s = cols.shape[0]
    H = np.empty((r * p, s))
    for i in range(r):
        for ch in range(p):
            for l in range(s):
                H[i * p + ch, l] = y[ch, rows[i] + cols[l] + k]
    return H


# ---------------------------------------------------------------------------
# numpy bodies


def _affine_steps_np(M, v, x0, C, n_steps):
    K = x0.shape[0]
    xs = np.empty((n_steps + 1, K))
    x = x0.copy()
    for j in range(n_steps + 1):
        xs[j] = x
        x = M @ x + v
    return C @ xs.T


def _rk4_linear_np(L, v0, h, n_steps, substeps, obs):
    # one RK4 substep of a linear ODE is multiplication by a fixed matrix
    n = v0.shape[0]
    hL = h * L
    eye = np.eye(n, dtype=np.complex128)
    step = eye.copy()
    term = eye.copy()
    for order in range(1, 5):
        term = term @ hL / order
        step = step + term
    out = np.empty((obs.shape[0], n_steps + 1), dtype=np.complex128)
    v = v0.astype(np.complex128).copy()
    for j in range(n_steps + 1):
        out[:, j] = obs @ v
        if j == n_steps:
            break
        for _ in range(substeps):
            v = step @ v
    return out


def _faddeev_leverrier_np(A):
    K = A.shape[0]
    p = np.zeros(K + 1)
    p[K] = 1.0
    N = np.zeros((K, K, K))
    N[K - 1] = np.eye(K)
    for k in range(K - 1, -1, -1):
        AN = A @ N[k]
        p[k] = -np.trace(AN) / (K - k)
        if k > 0:
            N[k - 1] = AN + p[k] * np.eye(K)
    res = np.abs(A @ N[0] + p[0] * np.eye(K)).max() if K else 0.0
    return p, N, res


def _hankel_np(y, rows, cols, k):
    idx = rows[:, None] + cols[None, :] + k
    blocks = y[:, idx]  # (p, r, s)
    return blocks.transpose(1, 0, 2).reshape(-1, cols.shape[0])


numpy_impl = SimpleNamespace(
    affine_steps=_affine_steps_np,
    rk4_linear=_rk4_linear_np,
    faddeev_leverrier=_faddeev_leverrier_np,
    hankel=_hankel_np,
)

if HAVE_NUMBA:
    numba_impl = SimpleNamespace(
        affine_steps=njit(cache=True)(_affine_steps_loop),
        rk4_linear=njit(cache=True)(_rk4_linear_loop),
        faddeev_leverrier=njit(cache=True)(_faddeev_leverrier_loop),
        hankel=njit(cache=True)(_hankel_loop),
    )
else:  # pragma: no cover
    numba_impl = None

_impl = numba_impl if USE_NUMBA else numpy_impl


def backend():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return "numba" if USE_NUMBA else "numpy"


def affine_steps(M, v, x0, C, n_steps):
    """Outputs ``C x_j`` of the recursion ``x_{j+1} = M x_j + v``."""
    return _impl.affine_steps(
        np.ascontiguousarray(M, dtype=float),
        np.ascontiguousarray(v, dtype=float),
        np.ascontiguousarray(x0, dtype=float),
        np.ascontiguousarray(C, dtype=float),
        int(n_steps),
    )


def rk4_linear(L, v0, h, n_steps, substeps, obs):
    """Classic RK4 for ``v' = L v``; returns ``obs @ v`` at every outer step."""
    return _impl.rk4_linear(
        np.ascontiguousarray(L, dtype=np.complex128),
        np.ascontiguousarray(v0, dtype=np.complex128),
        float(h),
        int(n_steps),
        int(substeps),
        np.ascontiguousarray(obs, dtype=np.complex128),
    )


def faddeev_leverrier(A):
    """Characteristic polynomial and adjugate coefficients of ``A``.

    Returns ``(p, N, residual)`` with ``det(sI - A) = sum_k p[k] s**k``,
    ``adj(sI - A) = sum_k N[k] s**k`` and ``residual = max|A N_0 + p_0 I|``.
    """
    return _impl.faddeev_leverrier(np.ascontiguousarray(A, dtype=float))


def hankel(y, rows, cols, k):
    """Dense generalized Hankel matrix, block (i, l) = ``y[:, rows[i]+cols[l]+k]``."""
    return _impl.hankel(
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        int(k),
    )
