"""Single-output transfer functions of affine LTI systems.

For ``x' = A x + b``, ``y = c x`` the Laplace transform of the output is

    Y(s) = c (sI - A)^-1 (x0 + b/s)

Both the resolvent numerator (adjugate) and ``det(sI - A)`` come from the
Faddeev-LeVerrier recursion. Coefficients are stored in ascending powers.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _kernels, _oracles
from .errors import ContractError, IllConditionedError, OrderMismatchError, ValidationError

log = logging.getLogger(__name__)

CANCEL_TOL = 1e-7
BALANCE_COND = 1e6
FL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RationalTF:
    """``num(s) / den(s)`` with ascending real coefficients."""

    num: np.ndarray
    den: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den.size == 0:
            raise ValidationError("denominator must be nonempty")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def den_degree(self):
        return self.den.size - 1

    @property
    def num_degree(self):
        return self.num.size - 1

    def __call__(self, s):
        s = np.asarray(s)
        return np.polyval(self.num[::-1], s) / np.polyval(self.den[::-1], s)

    def named(self, num_letter="q"):
        """Coefficients keyed ``q0..`` (numerator) and ``p0..`` (denominator)."""
        out = {f"{num_letter}{k}": float(v) for k, v in enumerate(self.num)}
        out.update({f"p{k}": float(v) for k, v in enumerate(self.den)})
        return out

    def to_dict(self):
        return {"num": self.num.tolist(), "den": self.den.tolist(), "normalized": self.normalized}

    @classmethod
    def from_dict(cls, doc):
        return cls(num=doc["num"], den=doc["den"], normalized=doc.get("normalized", False))

    def to_json(self):
        return json.dumps(self.to_dict())

    def pretty(self, digits=4):
        return f"({_poly_str(self.num, digits)}) / ({_poly_str(self.den, digits)})"

    def __str__(self):
        return self.pretty()


def _poly_str(c, digits):
    terms = []
    for k in range(len(c) - 1, -1, -1):
        v = c[k]
        if v == 0:
            continue
        mag = abs(v)
        sign = "-" if v < 0 else "+"
        coef = "" if (np.isclose(mag, 1.0) and k > 0) else f"{mag:.{digits}g}"
        var = "" if k == 0 else ("s" if k == 1 else f"s^{k}")
        body = f"{coef} {var}".strip() if coef and var else (coef or var)
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


def _balance(A):
    As, T = sla.matrix_balance(A, permute=False)
    return As, T


def transfer_coeffs(A, b, c_row, x0, balance="auto"):
    """Raw transfer function of ``c (sI - A)^-1 (x0 + b/s)``.

    With ``b != 0`` the result is ``(s cN(s)x0 + cN(s)b) / (s det(sI - A))``,
    otherwise ``cN(s)x0 / det(sI - A)``; ``N(s)`` is the adjugate. A
    diagonal balancing similarity is applied first when ``A`` is badly
    conditioned (``balance="auto"``), always (``True``) or never (``False``).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    K = A.shape[0]
    if A.shape != (K, K):
        raise ValidationError(f"A must be square, got {A.shape}")
    c = np.asarray(c_row, dtype=float).reshape(-1)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    b = np.zeros(K) if b is None else np.asarray(b, dtype=float).reshape(-1)
    if not (c.size == x0.size == b.size == K):
        raise ValidationError("c, x0 and b must match the size of A")
    if balance == "auto":
        with np.errstate(all="ignore"):
            balance = bool(K and np.linalg.cond(A) > BALANCE_COND)
    if balance and K:
        A, T = _balance(A)
        # A_bal = T^-1 A T
        c = c @ T
        x0 = np.linalg.solve(T, x0)
        b = np.linalg.solve(T, b)

    p, N, res = _kernels.faddeev_leverrier(A) if K else (np.ones(1), np.zeros((0, 0, 0)), 0.0)
    if K:
        scale = np.abs(A).max() * max(1.0, np.abs(N[0]).max())
        if res > FL_TOL * max(scale, np.finfo(float).tiny):
            raise IllConditionedError(
                f"Faddeev-LeVerrier closure residual {res:.2e} exceeds {FL_TOL:g} x {scale:.2e}; "
                "try balancing or rescaling the system"
            )
    cNx = np.einsum("i,kij,j->k", c, N, x0) if K else np.zeros(0)
    if np.any(b != 0):
        cNb = np.einsum("i,kij,j->k", c, N, b)
        num = np.zeros(K + 1)
        num[1:] += cNx
        num[:K] += cNb
        den = np.concatenate([[0.0], p])
    else:
        num = cNx if K else np.zeros(1)
        den = p
    return RationalTF(num=num, den=den)


def _dft_coeffs(f, n_coef, radius):
    # values at radius * exp(2 pi i j / n) -> ascending coefficients
    n = n_coef
    s = radius * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([f(si) for si in s])
    coef = np.fft.fft(vals) / n
    coef = coef / radius ** np.arange(n)
    return coef


def canonical_qp(A, c_row, x0, b=None):
    """``Q(s) / P(s)`` for a system without forcing.

    ``P(s) = det(sI - A)`` and ``Q(s) = -det([[sI - A, x0], [c, 0]])``,
    both evaluated as determinants on a circle and interpolated, so this is
    independent of the adjugate recursion.
    """
    if b is not None and np.any(np.asarray(b) != 0):
        raise ContractError("canonical Q/P form applies to unforced systems (b = 0) only")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    K = A.shape[0]
    c = np.asarray(c_row, dtype=float).reshape(-1)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    radius = max(1.0, np.abs(np.linalg.eigvals(A)).max()) if K else 1.0
    eye = np.eye(K)

    def P(s):
        return np.linalg.det(s * eye - A)

    def Q(s):
        M = np.zeros((K + 1, K + 1), dtype=complex)
        M[:K, :K] = s * eye - A
        M[:K, K] = x0
        M[K, :K] = c
        return -np.linalg.det(M)

    p = _dft_coeffs(P, K + 1, radius)
    q = _dft_coeffs(Q, K + 1, radius)
    tiny = 1e-9 * max(1.0, np.abs(p).max())
    if np.abs(p.imag).max() > tiny or np.abs(q.imag).max() > tiny:
        raise IllConditionedError("determinant interpolation produced complex coefficients")
    return RationalTF(num=q.real[:K] if K else np.zeros(1), den=p.real)


def _trim(c, rel=1e-14):
    c = np.asarray(c, dtype=float)
    mag = np.abs(c).max() if c.size else 0.0
    if mag == 0:
        return c[:1] * 0
    nz = np.flatnonzero(np.abs(c) > rel * mag)
    return c[: nz[-1] + 1]


def normalize_tf(tf, cancel_tol=CANCEL_TOL, degree=None):
    """Monic, common-factor-free form of ``tf``.

    Numerator/denominator root pairs closer than ``cancel_tol`` (relative to
    ``max(1, |root|)``) cancel. With ``degree`` the closest pairs are
    cancelled until the denominator has exactly that degree.
    """
    den = _trim(tf.den)
    if not np.any(den):
        raise ValidationError("denominator is identically zero")
    num = _trim(tf.num)
    lead = den[-1]
    den = den / lead
    num = num / lead
    if not np.any(num):
        if degree not in (None, 0):
            raise OrderMismatchError("zero transfer function has no poles to keep")
        return RationalTF(num=[0.0], den=[1.0], normalized=True)
    if degree is not None and degree > den.size - 1:
        raise OrderMismatchError(f"denominator degree {den.size - 1} is below requested {degree}")

    # exact powers of s are split off first so structural zeros stay exact
    zn = _zero_power(num)
    zd = _zero_power(den)
    common = min(zn, zd)
    zn -= common
    zd -= common
    num = num[zn + common :]
    den = den[zd + common :]
    target = None if degree is None else degree - zd
    if target is not None and target < 0:
        raise OrderMismatchError(f"denominator has a pole of order {zd} at s=0, above degree {degree}")

    rn = np.roots(num[::-1]) if num.size > 1 else np.zeros(0)
    rd = np.roots(den[::-1]) if den.size > 1 else np.zeros(0)
    cn = _clusters(rn)
    cd = _clusters(rd)
    drop_n, drop_d = [], []
    n_den = rd.size
    while cn and cd:
        if target is not None and n_den <= target:
            break
        cent_n = np.array([np.mean(rn[g]) for g in cn])
        cent_d = np.array([np.mean(rd[g]) for g in cd])
        rel = np.abs(np.subtract.outer(cent_n, cent_d)) / np.maximum(1.0, np.abs(cent_d))[None, :]
        i, j = np.unravel_index(np.argmin(rel), rel.shape)
        forced = target is not None and n_den > target
        if rel[i, j] > cancel_tol and not forced:
            break
        k = min(len(cn[i]), len(cd[j]))
        if target is not None:
            k = min(k, n_den - target)
        drop_n += cn[i][:k]
        drop_d += cd[j][:k]
        n_den -= k
        cn[i] = cn[i][k:]
        cd[j] = cd[j][k:]
        cn = [g for g in cn if g]
        cd = [g for g in cd if g]
    if target is not None and n_den != target:
        raise OrderMismatchError(
            f"cannot reduce denominator to degree {degree}: numerator has too few roots to cancel"
        )
    if drop_d:
        # each side is divided by the factor built from its own root cluster;
        # symmetric functions of a cluster are accurate even when its members are not
        den = _deflate(den, rd[drop_d])
        num = _trim(_deflate(num, rn[drop_n]))
        num = num / den[-1]
        den = den / den[-1]
    num = np.concatenate([np.zeros(zn), num])
    den = np.concatenate([np.zeros(zd), den])
    return RationalTF(num=num, den=den, normalized=True)


def _deflate(c, roots):
    factor = np.real(np.poly(np.sort_complex(np.asarray(roots))))
    return np.polydiv(c[::-1], factor)[0][::-1]


def _clusters(roots, rel_tol=1e-5):
    """Group numerically coincident roots (multiple roots split by rounding)."""
    groups = []
    for idx in np.argsort(roots.real, kind="stable"):
        r = roots[idx]
        for g in groups:
            c = np.mean(roots[g])
            if abs(r - c) <= rel_tol * max(1.0, abs(c)):
                g.append(int(idx))
                break
        else:
            groups.append([int(idx)])
    return groups


def _zero_power(c):
    nz = np.flatnonzero(c != 0)
    return int(nz[0]) if nz.size else 0


def _krylov_basis(A, starts, tol):
    """Orthonormal basis of the smallest A-invariant subspace containing ``starts``."""
    K = A.shape[0]
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    Q = np.zeros((K, 0))
    queue = [(v, max(np.linalg.norm(v), np.finfo(float).tiny)) for v in starts if np.any(v)]
    while queue and Q.shape[1] < K:
        v, ref = queue.pop(0)
        w = v.copy()
        for _ in range(2):  # re-orthogonalize
            w -= Q @ (Q.T @ w)
        nrm = np.linalg.norm(w)
        if nrm <= tol * ref:
            continue
        q = w / nrm
        Q = np.column_stack([Q, q])
        queue.append((A @ q, scale))
    return Q


def minimal_realization(A, c_row, x0, b=None, tol=1e-9):
    """Project onto the part of the state space both reached from ``x0, b`` and seen by ``c``.

    ``c_row`` may hold several output rows (joint minimal order). Returns
    ``(Am, bm, cm, xm)``. The transfer function is unchanged, and
    modes that cancel between numerator and denominator are removed without
    root finding.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c = np.asarray(c_row, dtype=float)
    C = np.atleast_2d(c)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    b = np.zeros_like(x0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    V = _krylov_basis(A, [x0, b], tol)
    Ac = V.T @ A @ V
    W = _krylov_basis(Ac.T, list(C @ V), tol)
    T = V @ W
    cm = C @ T
    return T.T @ A @ T, T.T @ b, (cm[0] if c.ndim == 1 else cm), T.T @ x0


def lti_tf(lti, output=0, cancel_tol=CANCEL_TOL, degree=None, minimal=True):
    """Normalized transfer function of one output of an :class:`AffineLTI`.

    With ``minimal`` (default) the system is first reduced to its minimal
    part, which removes common factors exactly.
    """
    if isinstance(output, str):
        output = list(lti.output_labels).index(output)
    A, b, c, x0 = lti.A, lti.b, lti.c[output], lti.x0
    if minimal:
        A, b, c, x0 = minimal_realization(A, c, x0, b)
    raw = transfer_coeffs(A, b, c, x0)
    return normalize_tf(raw, cancel_tol=cancel_tol, degree=degree)


def realization_tf(realization, output=0, cancel_tol=CANCEL_TOL, degree=None):
    """Normalized transfer function of a continuous ERA realization (no forcing term)."""
    if realization.A_hat is None:
        raise ValidationError("realization has no continuous-time matrix; call to_continuous first")
    raw = transfer_coeffs(realization.A_hat, None, realization.c_hat[output], realization.x0_hat)
    return normalize_tf(raw, cancel_tol=cancel_tol, degree=degree)


def model_tf_oracle(model_id, theta, output_tag):
    """Transfer function of a built-in model from its closed-form coefficients.

    ``model_id`` is one of ``energy_transfer`` (outputs ``Z1``, ``Z2``),
    ``dephasing3`` (``X1``), ``relaxation_x`` (``X1``; only
    ``q6, q5, q4, p7, p6`` known, the rest NaN) or ``relaxation_z`` (``Z1``).
    """
    key = _oracles.ALIASES.get(str(model_id))
    fn = _oracles.TABLE.get((key, str(output_tag).lower()))
    if fn is None:
        raise ValidationError(f"no closed-form transfer function for {model_id!r} / {output_tag!r}")
    num, den = fn(np.asarray(theta, dtype=float))
    return RationalTF(num=num, den=den, normalized=True)


def coefficient_weights(den_degree, num_degree):
    """Total polynomial degree in the parameters of each normalized coefficient.

    Rates and frequencies all carry one unit of inverse time, so the
    coefficient of ``s^k`` in a monic degree-``d`` denominator is homogeneous
    of degree ``d - k`` and the numerator coefficient of ``s^k`` has degree
    ``d - 1 - k``.
    """
    den_w = den_degree - np.arange(den_degree + 1)
    num_w = den_degree - 1 - np.arange(num_degree + 1)
    return num_w, den_w


ORACLE_CASES = (
    ("energy_transfer", "z1", "energy_transfer"),
    ("energy_transfer", "z2", "energy_transfer"),
    ("dephasing_chain(3)", "x1", "dephasing3"),
    ("relaxation_chain_x", "x1", "relaxation_x"),
    ("relaxation_chain_z", "z1", "relaxation_z"),
)


def _rel_dev(a, b):
    # oracle NaNs mark coefficients without a closed form
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    m = ~np.isnan(b)
    a, b = a[m], b[m]
    if not a.size:
        return 0.0
    return float(np.max(np.abs(a - b) / np.where(b == 0, 1.0, np.abs(b))))


def verify_formulas(n_samples=100, seed=0, cases=ORACLE_CASES):
    """Compare numeric transfer functions with the closed forms at random parameters.

    Returns a list of ``(model_id, output, worst_relative_deviation)``.
    Zero oracle entries are compared absolutely.
    """
    from .algebra import structure_table
    from .generator import compile_model
    from .models import builtin_model

    rng = np.random.default_rng(seed)
    out = []
    for model_id, output, oracle_id in cases:
        model = builtin_model(model_id)
        table = structure_table(model.n_qubits)
        worst = 0.0
        for _ in range(n_samples):
            theta = model.sample_theta(rng)
            ref = model_tf_oracle(oracle_id, theta, output)
            tf = lti_tf(compile_model(model, theta, table), output, degree=ref.den.size - 1)
            worst = max(worst, _rel_dev(tf.num, ref.num), _rel_dev(tf.den, ref.den))
        out.append((model_id, output, worst))
    return out
