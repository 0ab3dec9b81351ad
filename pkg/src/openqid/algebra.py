"""Normalized Pauli-string basis of su(2^n) and its structure constants.

The basis elements are ``F_k = P_k / 2**(n/2)`` for the non-identity Pauli
strings ``P_k`` in lexicographic order over ``I < X < Y < Z``, with the
leftmost character acting on qubit 1 (the most significant tensor factor).
They are Hermitian, traceless and orthonormal under ``tr(F_m F_n)``.

Structure constants follow

    [iF_j, iF_k] = sum_l C[j, k, l] iF_l
    {F_j, F_k}   = (2/N) delta_jk I + sum_l d[j, k, l] F_l

Both ``C`` and ``d`` are real for a Hermitian basis. The anticommutator
table written in terms of ``iF`` (``{iF_j, iF_k} = -(2/N) delta I + sum D iF_l``)
is purely imaginary, ``D = i d``; :func:`openqid.generator.assemble_generator`
performs that conversion.
"""

from dataclasses import dataclass, field
from functools import cache, cached_property
from itertools import product

import numpy as np
import scipy.sparse as sps

from .errors import CapacityError, ConsistencyError, ValidationError

MAX_QUBITS = 4
ZERO_TOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(label):
    """Dense matrix of an (unnormalized) Pauli string such as ``"XZ"``."""
    m = np.ones((1, 1), dtype=complex)
    for ch in label:
        try:
            m = np.kron(m, PAULI[ch])
        except KeyError:
            raise ValidationError(f"invalid Pauli character {ch!r} in {label!r}") from None
    return m


def embed(op, qubit, n_qubits):
    """Place a single-qubit operator on ``qubit`` (1-based) of an n-qubit register."""
    if not 1 <= qubit <= n_qubits:
        raise ValidationError(f"qubit {qubit} outside 1..{n_qubits}")
    m = np.ones((1, 1), dtype=complex)
    for q in range(1, n_qubits + 1):
        m = np.kron(m, op if q == qubit else PAULI["I"])
    return m


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Ordered orthonormal basis of traceless Hermitian operators."""

    n_qubits: int
    dim: int
    elements: np.ndarray
    labels: tuple

    def __len__(self):
        return len(self.labels)

    @cached_property
    def _index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label):
        """Position of a Pauli-string label in the basis."""
        try:
            return self._index[label]
        except KeyError:
            raise ValidationError(f"{label!r} is not a basis label") from None

    def gram(self):
        """Hilbert-Schmidt Gram matrix ``tr(F_m^dagger F_n)``."""
        flat = self.elements.reshape(len(self), -1)
        return flat.conj() @ flat.T


def pauli_basis(n_qubits):
    """Normalized non-identity Pauli strings on ``n_qubits`` qubits.

    Parameters
    ----------
    n_qubits : int
        Register size, 1 to 4.

    Returns
    -------
    OperatorBasis
        ``4**n - 1`` elements ``P / 2**(n/2)`` in lexicographic order.
    """
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be an integer in 1..{MAX_QUBITS}, got {n_qubits!r}")
    n_qubits = int(n_qubits)
    labels = tuple("".join(t) for t in product("IXYZ", repeat=n_qubits))[1:]
    scale = 2.0 ** (-n_qubits / 2)
    elements = np.array([pauli_string(lab) * scale for lab in labels])
    elements.setflags(write=False)
    return OperatorBasis(n_qubits=n_qubits, dim=2**n_qubits, elements=elements, labels=labels)


def _coo_table(table):
    idx = np.argwhere(np.abs(table) > ZERO_TOL)
    return idx, table[tuple(idx.T)]


def _slices(idx, val, dim, axis):
    """Sparse 2-D slices of a 3-index COO table taken along ``axis``."""
    rest = [a for a in range(3) if a != axis]
    out = []
    order = np.argsort(idx[:, axis], kind="stable")
    idx, val = idx[order], val[order]
    bounds = np.searchsorted(idx[:, axis], np.arange(dim + 1))
    for j in range(dim):
        lo, hi = bounds[j], bounds[j + 1]
        out.append(
            sps.csr_matrix(
                (val[lo:hi], (idx[lo:hi, rest[0]], idx[lo:hi, rest[1]])), shape=(dim, dim)
            )
        )
    return out


@dataclass(frozen=True, eq=False)
class StructureTable:
    """Sparse commutator/anticommutator structure constants of a basis.

    ``C_idx``/``C_val`` (and ``d_idx``/``d_val``) hold the COO entries with
    ``|value| > 1e-12``. Dense views and per-index sparse slices are built
    on demand.
    """

    basis: OperatorBasis
    C_idx: np.ndarray
    C_val: np.ndarray
    d_idx: np.ndarray
    d_val: np.ndarray
    trace_term: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return len(self.basis)

    def _dense(self, idx, val):
        out = np.zeros((self.size,) * 3)
        out[tuple(idx.T)] = val
        return out

    def C(self):
        """Dense ``C[j, k, l]``."""
        return self._dense(self.C_idx, self.C_val)

    def d(self):
        """Dense real anticommutator table ``d[j, k, l]``."""
        return self._dense(self.d_idx, self.d_val)

    def slices(self, which, axis):
        """Cached list of sparse 2-D slices of ``"C"`` or ``"d"`` along ``axis``."""
        key = (which, axis)
        if key not in self._cache:
            idx, val = (self.C_idx, self.C_val) if which == "C" else (self.d_idx, self.d_val)
            self._cache[key] = _slices(idx, val, self.size, axis)
        return self._cache[key]

    def commutator(self, j, k):
        """``[iF_j, iF_k]`` rebuilt from the table."""
        row = self.C_idx[:, 0] == j
        sel = row & (self.C_idx[:, 1] == k)
        F = self.basis.elements
        return 1j * np.tensordot(self.C_val[sel], F[self.C_idx[sel, 2]], axes=1)

    def anticommutator(self, j, k):
        """``{iF_j, iF_k}`` rebuilt from the table, including the identity term."""
        sel = (self.d_idx[:, 0] == j) & (self.d_idx[:, 1] == k)
        F = self.basis.elements
        N = self.basis.dim
        out = -np.tensordot(self.d_val[sel], F[self.d_idx[sel, 2]], axes=1)
        if j == k:
            out = out + self.trace_term * np.eye(N)
        return np.asarray(out, dtype=complex)


def structure_constants(basis):
    """Compute the commutator and anticommutator tables of ``basis`` numerically.

    ``C[j,k,l] = tr((iF_l)^dagger [iF_j, iF_k]) = i tr(F_l [F_j, F_k])`` and
    ``d[j,k,l] = tr(F_l {F_j, F_k})``. Imaginary residue above 1e-12 raises
    :class:`ConsistencyError`.
    """
    F = basis.elements
    m = len(basis)
    N = basis.dim
    # projector onto the basis: tr(F_l X) = <vec(F_l^T), vec(X)>
    proj = F.transpose(0, 2, 1).reshape(m, N * N).T
    c_idx, c_val, d_idx, d_val = [], [], [], []
    for j in range(m):
        left = F[j] @ F  # F_j F_k for all k
        right = F @ F[j]
        comm = (left - right).reshape(m, N * N) @ proj
        anti = (left + right).reshape(m, N * N) @ proj
        Cj = 1j * comm
        for name, tab in (("C", Cj), ("d", anti)):
            if np.abs(tab.imag).max() > ZERO_TOL:
                raise ConsistencyError(f"structure constant {name} has imaginary residue at j={j}")
        for tab, idx_out, val_out in ((Cj.real, c_idx, c_val), (anti.real, d_idx, d_val)):
            kl = np.argwhere(np.abs(tab) > ZERO_TOL)
            idx_out.append(np.column_stack([np.full(len(kl), j), kl]))
            val_out.append(tab[kl[:, 0], kl[:, 1]])
    return StructureTable(
        basis=basis,
        C_idx=np.concatenate(c_idx),
        C_val=np.concatenate(c_val),
        d_idx=np.concatenate(d_idx),
        d_val=np.concatenate(d_val),
        trace_term=-2.0 / N,
    )


@cache
def structure_table(n_qubits):
    """Cached :func:`structure_constants` of :func:`pauli_basis` ``(n_qubits)``."""
    return structure_constants(pauli_basis(n_qubits))


def _check_hermitian(O, N, what="operator"):
    O = np.asarray(O, dtype=complex)
    if O.shape != (N, N):
        raise ValidationError(f"{what} must be {N}x{N}, got {O.shape}")
    if np.abs(O - O.conj().T).max() > 1e-10 * max(1.0, np.abs(O).max()):
        raise ValidationError(f"{what} is not Hermitian")
    return O


def expand_operator(O, basis):
    """Real coefficients ``o_n = tr(O F_n)`` of a Hermitian operator.

    The identity component is dropped, so ``sum_n o_n F_n`` is the traceless
    part of ``O``.
    """
    O = _check_hermitian(O, basis.dim)
    coeffs = np.einsum("nab,ba->n", basis.elements, O)
    return coeffs.real.copy()
