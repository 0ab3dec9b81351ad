import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from openqid.algebra import (
    PAULI,
    embed,
    expand_operator,
    pauli_basis,
    pauli_string,
    structure_constants,
    structure_table,
)
from openqid.errors import CapacityError, ValidationError


@pytest.mark.parametrize("n", [1, 2, 3])
def test_basis_is_orthonormal_traceless_hermitian(n):
    b = pauli_basis(n)
    assert len(b) == 4**n - 1
    assert np.allclose(b.gram(), np.eye(len(b)), atol=1e-14)
    for F in b.elements:
        assert abs(np.trace(F)) < 1e-14
        assert np.allclose(F, F.conj().T)


def test_label_order_and_qubit_convention():
    b = pauli_basis(2)
    assert b.labels[:4] == ("IX", "IY", "IZ", "XI")
    assert b.labels[-1] == "ZZ"
    # leftmost character is qubit 1
    assert np.allclose(embed(PAULI["Z"], 1, 2), pauli_string("ZI"))
    assert b.index("ZI") == b.labels.index("ZI")


def test_capacity_limits():
    with pytest.raises(CapacityError):
        pauli_basis(5)
    with pytest.raises(CapacityError):
        pauli_basis(0)


def test_invalid_pauli_label():
    with pytest.raises(ValidationError):
        pauli_string("XQ")


def test_single_qubit_structure_constants():
    t = structure_table(1)
    C = t.C()
    # [i sx, i sy] = -2 i sz in unnormalized Paulis; normalized by 1/sqrt(2)
    assert C[0, 1, 2] == pytest.approx(-np.sqrt(2))
    assert np.allclose(t.d(), 0.0)


@pytest.mark.parametrize("n", [1, 2])
def test_structure_constant_symmetries(n):
    t = structure_table(n)
    C, d = t.C(), t.d()
    assert np.allclose(C, -C.transpose(1, 0, 2))
    # C is totally antisymmetric, d totally symmetric for an orthonormal basis
    assert np.allclose(C, -C.transpose(0, 2, 1))
    assert np.allclose(d, d.transpose(1, 0, 2))
    assert np.allclose(d, d.transpose(0, 2, 1))


def test_tables_rebuild_products(rng):
    t = structure_table(2)
    F = t.basis.elements
    for _ in range(20):
        j, k = rng.integers(0, 15, size=2)
        comm = (1j * F[j]) @ (1j * F[k]) - (1j * F[k]) @ (1j * F[j])
        anti = (1j * F[j]) @ (1j * F[k]) + (1j * F[k]) @ (1j * F[j])
        assert np.allclose(t.commutator(j, k), comm, atol=1e-14)
        assert np.allclose(t.anticommutator(j, k), anti, atol=1e-14)


def test_structure_table_is_cached():
    assert structure_table(2) is structure_table(2)
    fresh = structure_constants(pauli_basis(2))
    assert np.allclose(fresh.C(), structure_table(2).C())


def test_expand_sigma_x_on_qubit_one():
    # sigma_x on qubit 1 of two qubits equals 2 F_XI
    b = pauli_basis(2)
    o = expand_operator(pauli_string("XI"), b)
    assert o[b.index("XI")] == pytest.approx(2.0)
    assert np.count_nonzero(np.abs(o) > 1e-14) == 1


def test_expand_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        expand_operator(np.array([[0, 1], [0, 0]]), pauli_basis(1))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (2, 4, 4), elements=st.floats(-3, 3)))
def test_expansion_reconstructs_traceless_part(parts):
    b = pauli_basis(2)
    M = parts[0] + 1j * parts[1]
    O = M + M.conj().T
    o = expand_operator(O, b)
    rebuilt = np.tensordot(o, b.elements, axes=1)
    traceless = O - np.trace(O) / 4 * np.eye(4)
    assert np.allclose(rebuilt, traceless, atol=1e-10)
