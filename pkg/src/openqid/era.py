"""Eigensystem realization from output traces.

The generalized Hankel matrix stacks output samples ``y(j_i + k + t_l)`` in
``p x 1`` blocks. A thin SVD of ``H(0)`` gives the order-``n`` factors
``P1, Sigma, Q1``; then

    Ad = Sigma^-1/2 P1^T H(1) Q1 Sigma^-1/2
    c  = first p rows of P1 Sigma^1/2
    x0 = Sigma^1/2 Q1^T e_1

reproduce ``y(j) = c Ad^j x0``. For long traces with contiguous lags the
Hankel matrix is applied matrix-free through FFT correlations and only the
leading singular triplets are computed.
"""

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, svds

from . import _kernels
from .errors import BranchCutError, ConsistencyError, DegenerateSignalError, ValidationError

log = logging.getLogger(__name__)

DENSE_LIMIT = 4_000_000  # Hankel entries above which the matrix-free path is used
LOG_ROUNDTRIP_TOL = 1e-9


@dataclass(frozen=True)
class OrderPolicy:
    """How many singular values to keep.

    ``kind`` is ``"threshold"`` (keep ``sigma > value * sigma_max``; ``None``
    means ``eps * max(r, s)``), ``"fixed"`` (keep exactly ``value``) or
    ``"model"`` (a fixed order taken from a model's transfer function, filled
    in by the caller).
    """

    kind: str = "threshold"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("threshold", "fixed", "model"):
            raise ValidationError(f"unknown order policy {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or int(self.value) < 1):
            raise ValidationError("fixed order policy needs a positive order")

    @classmethod
    def threshold(cls, rel=None):
        return cls("threshold", rel)

    @classmethod
    def fixed(cls, order):
        return cls("fixed", int(order))

    @classmethod
    def model(cls, order=None):
        return cls("model", None if order is None else int(order))

    @property
    def order(self):
        """Fixed order, or None for thresholding."""
        if self.kind == "threshold":
            return None
        if self.value is None:
            raise ValidationError("model order policy has not been resolved to an order")
        return int(self.value)

    def select(self, sv, shape):
        """Number of singular values to keep from the descending list ``sv``."""
        if self.kind == "threshold":
            if sv.size == 0 or sv[0] == 0:
                return 0
            rel = np.finfo(float).eps * max(shape) if self.value is None else float(self.value)
            return int(np.sum(sv > rel * sv[0]))
        n = self.order
        if n > sv.size:
            raise ValidationError(f"requested order {n} exceeds Hankel rank bound {sv.size}")
        if sv[n - 1] <= np.finfo(float).eps * max(shape) * sv[0]:
            raise DegenerateSignalError(f"singular value {n} is numerically zero; signal has lower order")
        return n

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class Realization:
    """Discrete realization ``(Ad_hat, c_hat, x0_hat)``, optionally with ``A_hat = log(Ad_hat)/dt``."""

    Ad_hat: np.ndarray
    c_hat: np.ndarray
    x0_hat: np.ndarray
    dt: float
    singular_values: np.ndarray
    A_hat: np.ndarray | None = None
    hankel_shape: tuple = ()

    @property
    def order(self):
        return self.Ad_hat.shape[0]

    def outputs(self, n):
        """``c Ad^j x0`` for ``j = 0..n-1``, shape ``(p, n)``."""
        return _kernels.affine_steps(self.Ad_hat, np.zeros(self.order), self.x0_hat, self.c_hat, n - 1)


def _offsets(given, count, name):
    if given is None:
        return np.arange(count)
    off = np.asarray(given, dtype=np.int64)
    if off.size == count and off.size and off[0] == 0:
        pass
    elif off.size == count - 1:
        off = np.concatenate([[0], off])
    else:
        raise ValidationError(f"{name} must list {count - 1} offsets after the implicit 0")
    if np.any(np.diff(off) <= 0):
        raise ValidationError(f"{name} must be strictly increasing positive integers")
    return off


def build_hankel(traces, r, s, k=0, row_offsets=None, col_offsets=None):
    """Dense generalized Hankel matrix ``H(k)`` of shape ``(r p, s)``.

    Parameters
    ----------
    traces : TraceSet or array (p, n+1)
    r, s : int
        Block rows and columns.
    k : int
        Shift; ``H(1)`` uses the same offsets as ``H(0)``.
    row_offsets, col_offsets : sequence of int, optional
        ``j_1..j_{r-1}`` and ``t_1..t_{s-1}`` (``j_0 = t_0 = 0`` implied).
        Default unit spacing.
    """
    y = np.atleast_2d(getattr(traces, "values", traces))
    rows = _offsets(row_offsets, r, "row_offsets")
    cols = _offsets(col_offsets, s, "col_offsets")
    need = rows[-1] + cols[-1] + k
    if need >= y.shape[1]:
        raise ValidationError(f"Hankel needs sample {need} but traces have {y.shape[1]}")
    return _kernels.hankel(y, rows, cols, k)


class HankelOperator(LinearOperator):
    """Matrix-free ``H(k)`` for unit offsets, applied by FFT correlation."""

    def __init__(self, y, r, s, k=0):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if r + s - 2 + k >= y.shape[1]:
            raise ValidationError(f"Hankel needs {r + s - 1 + k} samples, traces have {y.shape[1]}")
        self.seg = y[:, k : k + r + s - 1]
        self.r, self.s, self.p = r, s, y.shape[0]
        super().__init__(dtype=float, shape=(r * self.p, s))

    def _matvec(self, v):
        v = np.ravel(v)
        out = np.empty((self.r, self.p))
        for ch in range(self.p):
            out[:, ch] = fftconvolve(self.seg[ch], v[::-1], mode="valid")
        return out.reshape(-1)

    def _rmatvec(self, u):
        u = np.ravel(u).reshape(self.r, self.p)
        acc = np.zeros(self.s)
        for ch in range(self.p):
            acc += fftconvolve(self.seg[ch], u[::-1, ch], mode="valid")
        return acc

    def _matmat(self, V):
        return np.column_stack([self._matvec(V[:, j]) for j in range(V.shape[1])])

    def dense(self):
        rows = np.arange(self.r)
        cols = np.arange(self.s)
        return _kernels.hankel(self.seg, rows, cols, 0)


def _truncated_svd(op, n):
    # deterministic start vector keeps ARPACK reproducible
    v0 = np.cos(np.arange(min(op.shape)) * 0.7) + 1.5
    U, sv, Vt = svds(op, k=n, v0=v0, tol=0, solver="arpack")
    order = np.argsort(sv)[::-1]
    return U[:, order], sv[order], Vt[order]


def _factors(U, sv, Vt, n, H1_Q):
    root = np.sqrt(sv[:n])
    P1 = U[:, :n]
    Q1 = Vt[:n].T
    Ad = (P1.T @ H1_Q(Q1)) / np.outer(root, root)
    return Ad, P1 * root, root * Q1[0]


def era_realize(H0, H1, p, order_policy=None, dt=1.0):
    """Realization from dense Hankel matrices ``H(0)``, ``H(1)``.

    Returns a :class:`Realization` holding all singular values of ``H(0)``.
    """
    H0 = np.asarray(H0, dtype=float)
    H1 = np.asarray(H1, dtype=float)
    if H0.shape != H1.shape:
        raise ValidationError(f"H0 {H0.shape} and H1 {H1.shape} differ in shape")
    if H0.shape[0] % p:
        raise ValidationError(f"H0 has {H0.shape[0]} rows, not a multiple of p={p}")
    policy = order_policy or OrderPolicy.threshold()
    U, sv, Vt = sla.svd(H0, full_matrices=False)
    n = policy.select(sv, H0.shape)
    if n == 0:
        raise DegenerateSignalError("Hankel matrix is zero; no realization")
    Ad, PS, x0 = _factors(U, sv, Vt, n, lambda Q: H1 @ Q)
    return Realization(
        Ad_hat=Ad, c_hat=PS[:p].copy(), x0_hat=x0, dt=float(dt), singular_values=sv, hankel_shape=H0.shape
    )


def era_from_traces(traces, r=None, s=None, order_policy=None, row_offsets=None, col_offsets=None, method="auto"):
    """Build ``H(0)``, ``H(1)`` from traces and realize.

    ``r = s = n_steps // 2`` by default. ``method`` is ``"dense"``,
    ``"truncated"`` (matrix-free, fixed order, unit offsets only) or
    ``"auto"`` (truncated when the order is fixed, the offsets are unit and
    the Hankel matrix has more than ``DENSE_LIMIT`` entries).
    """
    y = np.atleast_2d(traces.values)
    p = y.shape[0]
    half = traces.n_steps // 2
    r = half if r is None else int(r)
    s = half if s is None else int(s)
    if r < 1 or s < 1:
        raise ValidationError("Hankel needs r, s >= 1")
    policy = order_policy or OrderPolicy.threshold()
    unit = row_offsets is None and col_offsets is None
    if method == "auto":
        big = r * p * s > DENSE_LIMIT
        method = "truncated" if (big and unit and policy.kind != "threshold") else "dense"
    if np.abs(y).max() == 0:
        raise DegenerateSignalError("all traces are zero")
    if method == "dense":
        H0 = build_hankel(y, r, s, 0, row_offsets, col_offsets)
        H1 = build_hankel(y, r, s, 1, row_offsets, col_offsets)
        return era_realize(H0, H1, p, policy, dt=traces.dt)
    if method != "truncated":
        raise ValidationError(f"unknown ERA method {method!r}")
    if not unit:
        raise ValidationError("truncated ERA supports unit offsets only")
    n = policy.order
    if n is None:
        raise ValidationError("truncated ERA needs a fixed or model order")
    op0 = HankelOperator(y, r, s, 0)
    op1 = HankelOperator(y, r, s, 1)
    if n >= min(op0.shape):
        raise ValidationError(f"order {n} too large for a {op0.shape} Hankel matrix")
    U, sv, Vt = _truncated_svd(op0, n)
    if sv[-1] <= 0:
        raise DegenerateSignalError(f"singular value {n} is zero; signal has lower order")
    Ad, PS, x0 = _factors(U, sv, Vt, n, op1.matmat)
    return Realization(
        Ad_hat=Ad, c_hat=PS[:p].copy(), x0_hat=x0, dt=float(traces.dt), singular_values=sv, hankel_shape=op0.shape
    )


def to_continuous(realization, dt=None):
    """Attach ``A_hat = log(Ad_hat) / dt`` (principal branch).

    Raises :class:`BranchCutError` when an eigenvalue of ``Ad_hat`` lies on
    the closed negative real axis; shrink ``dt`` in that case.
    """
    dt = realization.dt if dt is None else float(dt)
    Ad = realization.Ad_hat
    lam = np.linalg.eigvals(Ad)
    scale = max(1.0, np.abs(lam).max())
    bad = (np.abs(lam) <= 1e-12 * scale) | ((lam.real < 0) & (np.abs(lam.imag) <= 1e-12 * scale))
    if np.any(bad):
        raise BranchCutError(
            f"Ad_hat has eigenvalue(s) {lam[bad]} on the branch cut of the logarithm; "
            "reduce the sampling period dt to avoid aliasing"
        )
    L = sla.logm(Ad)
    if np.iscomplexobj(L):
        if np.abs(L.imag).max() > 1e-8 * max(1.0, np.abs(L).max()):
            raise ConsistencyError("matrix logarithm of a real matrix came out complex")
        L = L.real
    err = np.abs(sla.expm(L) - Ad).max() / max(np.abs(Ad).max(), 1e-300)
    if err > LOG_ROUNDTRIP_TOL:
        raise ConsistencyError(f"log/exp round trip error {err:.2e} above {LOG_ROUNDTRIP_TOL}")
    return replace(realization, A_hat=L / dt, dt=dt)


def dump_singular_values(realization, path):
    """Write ``index,sigma,ratio`` rows for diagnostics."""
    sv = np.asarray(realization.singular_values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "sigma", "ratio"])
        for i, v in enumerate(sv, start=1):
            w.writerow([i, repr(float(v)), repr(float(v / sv[0])) if sv[0] else "nan"])
