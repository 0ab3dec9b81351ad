import json

import numpy as np
import pytest
import reference_matrices as ref

from openqid.algebra import pauli_basis, pauli_string, structure_table
from openqid.dynamics import simulate_traces
from openqid.errors import ValidationError
from openqid.generator import (
    AffineLTI,
    ParamModel,
    accessible_set,
    assemble_generator,
    coherence_vector,
    compile_model,
    generic_accessible_set,
    load_model_json,
    model_from_dict,
    product_state,
    restrict,
)
from openqid.models import builtin_model

# Hamiltonian parameters of each model (negated when comparing with the
# hand-written displays, which use the opposite raising-operator convention)
H_PARAMS = {
    "energy_transfer": [0, 1],
    "dephasing_chain(3)": [0, 1, 2, 3, 4],
    "relaxation_chain_x": [0, 1, 2],
    "relaxation_chain_z": [0, 1, 2],
}


def _flip(model_id, theta):
    t = np.array(theta, dtype=float)
    t[H_PARAMS[model_id]] *= -1
    return t


@pytest.mark.parametrize("seed", range(5))
def test_energy_transfer_matches_hand_display(seed):
    m = builtin_model("energy_transfer")
    theta = m.sample_theta(np.random.default_rng(seed))
    s = compile_model(m, theta, structure_table(2), order="display")
    A, b = ref.energy_transfer(_flip("energy_transfer", theta))
    assert np.allclose(s.A, A, atol=1e-13)
    assert np.allclose(s.b, b, atol=1e-13)
    assert np.allclose(s.x0, np.eye(6)[0])
    assert np.allclose(s.c, np.eye(6)[:2])


def test_prime_spot_checks():
    # one parameter at a time set to a distinct prime, the rest zero
    cases = [
        ("dephasing_chain(3)", ref.dephasing3, [2, 3, 5, 7, 11, 13, 17, 19], 3),
        ("relaxation_chain_x", ref.relaxation_x, [2, 3, 5, 7, 11], 2),
    ]
    for mid, display, primes, n in cases:
        m = builtin_model(mid)
        for i, p in enumerate(primes):
            theta = np.zeros(len(primes))
            theta[i] = p
            s = compile_model(m, theta, structure_table(n), order="display")
            assert np.allclose(s.A, display(_flip(mid, theta)), atol=1e-12), (mid, m.theta_names[i])
            assert np.allclose(s.b, 0)


def test_relaxation_z_matches_hand_display():
    m = builtin_model("relaxation_chain_z")
    theta = np.array([2.0, 3, 5, 7, 11])
    s = compile_model(m, theta, structure_table(2), order="display")
    A, b = ref.relaxation_z(_flip("relaxation_chain_z", theta))
    assert np.allclose(s.A, A)
    assert np.allclose(s.b, b)
    assert np.allclose(s.x0, np.eye(6)[1])


def test_relaxation_x_initial_state_and_zero_forcing():
    m = builtin_model("relaxation_chain_x")
    s = compile_model(m, m.sample_theta(np.random.default_rng(3)), structure_table(2), order="display")
    assert np.allclose(s.x0, [1, 0, 0, 0, 1, 0, 0, 0])
    assert np.allclose(s.b, 0)


def test_energy_transfer_nominal_entries():
    m = builtin_model("energy_transfer")
    s = compile_model(m, m.theta_nominal, structure_table(2), order="display")
    assert np.allclose(np.diag(s.A)[:3], [-0.0722, -0.044, -0.1231])
    assert np.allclose(s.b[:2], [-0.02, -0.0176])


@pytest.mark.parametrize(
    "mid, size",
    [
        ("energy_transfer", 6),
        ("relaxation_chain_x", 8),
        ("relaxation_chain_z", 6),
        ("dephasing_chain(2)", 4),
        ("dephasing_chain(3)", 6),
        ("closed_chain(2)", 4),
        ("closed_chain(3)", 6),
    ],
)
def test_accessible_set_sizes(mid, size):
    m = builtin_model(mid)
    assert len(generic_accessible_set(m, structure_table(m.n_qubits))) == size


def test_accessible_set_is_closed(table2):
    m = builtin_model("relaxation_chain_x")
    full = assemble_generator(m, m.sample_theta(np.random.default_rng(1)), table2)
    idx = accessible_set(full)
    out = np.setdiff1d(np.arange(15), idx)
    assert np.abs(full.A[np.ix_(idx, out)]).max() == 0
    assert idx == sorted(idx)


def test_restrict_rejects_open_index_set(table2, energy):
    full = assemble_generator(energy, energy.theta_nominal, table2)
    with pytest.raises(ValidationError):
        restrict(full, [full.state_labels.index("ZI")])


def test_restrict_by_labels_and_units(table2, energy):
    full = assemble_generator(energy, energy.theta_nominal, table2)
    labels = ["ZI", "IZ", "XX", "XY", "YX", "YY"]
    norm = restrict(full, labels, pauli_units=False)
    pauli = restrict(full, labels)
    assert np.allclose(pauli.x0, 2 * norm.x0)
    assert np.allclose(pauli.c, norm.c / 2)
    assert np.allclose(pauli.A, norm.A)
    # output is unchanged by the rescaling
    assert np.allclose(pauli.c @ pauli.x0, norm.c @ norm.x0)


def test_coherence_vector_validation():
    b = pauli_basis(1)
    with pytest.raises(ValidationError):
        coherence_vector(np.eye(2), b)
    with pytest.raises(ValidationError):
        coherence_vector(np.diag([1.5, -0.5]), b)
    x = coherence_vector(product_state("+"), b)
    assert np.allclose(x, [1 / np.sqrt(2), 0, 0])


def test_larmor_precession():
    # H = (w/2) sigma_z: <sigma_x> = cos(w t), <sigma_y> = sin(w t)
    doc = {
        "name": "larmor",
        "n_qubits": 1,
        "parameters": ["w"],
        "hamiltonian": [{"pauli": "Z", "coeff": {"w": 0.5}}],
        "observables": ["X", "Y"],
        "initial_state": "+",
    }
    m = model_from_dict(doc)
    s = compile_model(m, [1.3], structure_table(1))
    tr = simulate_traces(s, 0.05, 200)
    t = tr.times
    assert np.allclose(tr.values[0], np.cos(1.3 * t), atol=1e-12)
    assert np.allclose(tr.values[1], np.sin(1.3 * t), atol=1e-12)


def test_complex_lindblad_matrix_gives_forcing():
    # decay |0> -> |1> (L = |1><0|) written directly as G
    basis = pauli_basis(1)
    l = np.einsum("jab,ba->j", basis.elements, np.array([[0, 0], [1, 0]], dtype=complex))
    G = np.outer(l, l.conj())
    m = ParamModel(
        name="synthetic",
        n_qubits=1,
        theta_names=("g",),
        hamiltonian=lambda t: np.zeros((2, 2)),
        observables=(("z", pauli_string("Z")),),
        initial_state=product_state("0"),
        lindblad=lambda t, basis: t[0] * G,
    )
    s = compile_model(m, [0.4], structure_table(1))
    assert np.abs(s.b).max() > 0
    tr = simulate_traces(s, 0.1, 50)
    assert np.allclose(tr.values[0], -1 + 2 * np.exp(-0.4 * tr.times), atol=1e-12)


def test_non_hermitian_lindblad_matrix_rejected():
    m = ParamModel(
        name="bad",
        n_qubits=1,
        theta_names=("g",),
        hamiltonian=lambda t: np.zeros((2, 2)),
        observables=(("z", pauli_string("Z")),),
        initial_state=product_state("0"),
        lindblad=lambda t, basis: np.triu(np.ones((3, 3))),
    )
    with pytest.raises(ValidationError):
        m.lindblad_matrix([1.0], pauli_basis(1))


def test_json_loader_roundtrip(tmp_path, table2):
    doc = {
        "name": "chain",
        "n_qubits": 2,
        "parameters": ["w1", "w2", "d", "g1", "g2"],
        "hamiltonian": [
            {"pauli": "ZI", "coeff": {"w1": 0.5}},
            {"pauli": "IZ", "coeff": {"w2": 0.5}},
            {"pauli": "XX", "coeff": {"d": 0.5}},
            {"pauli": "YY", "coeff": {"d": 0.5}},
        ],
        "dissipators": [
            {"type": "lowering", "qubit": 1, "rate": {"g1": 2.0}},
            {"type": "lowering", "qubit": 2, "rate": {"g2": 2.0}},
        ],
        "observables": ["XI"],
        "initial_state": "+0",
        "nominal": [1.0, 1.5, 0.3, 0.05, 0.07],
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    m = load_model_json(path)
    assert m.theta_names == ("w1", "w2", "d", "g1", "g2")
    # the hand-built document reproduces the built-in relaxation chain
    builtin = builtin_model("relaxation_chain_x")
    a = compile_model(m, m.theta_nominal, table2)
    b = compile_model(builtin, m.theta_nominal, table2)
    assert np.allclose(a.A, b.A) and np.allclose(a.x0, b.x0)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.pop("observables"), "missing key"),
        (lambda d: d["hamiltonian"].append({"pauli": "Z", "coeff": 1.0}), "wrong length"),
        (lambda d: d["dissipators"].append({"type": "bogus"}), "unknown type"),
        (lambda d: d["hamiltonian"].append({"pauli": "ZZ", "coeff": {"nope": 1}}), "unknown parameter"),
        (lambda d: d["hamiltonian"].append({"coeff": 1.0}), "missing key"),
    ],
)
def test_json_loader_errors(mutate, message):
    doc = {
        "name": "x",
        "n_qubits": 2,
        "parameters": ["w"],
        "hamiltonian": [{"pauli": "ZI", "coeff": {"w": 1}}],
        "dissipators": [],
        "observables": ["ZI"],
        "initial_state": "00",
    }
    mutate(doc)
    with pytest.raises(ValidationError, match=message):
        model_from_dict(doc)


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "name": "x",\n  oops\n}')
    with pytest.raises(ValidationError, match=r"bad.json:3"):
        load_model_json(p)


def test_affine_lti_output_row(table2, energy):
    s = compile_model(energy, energy.theta_nominal, table2)
    one = s.output_row("z2")
    assert isinstance(one, AffineLTI)
    assert one.output_labels == ("z2",)
