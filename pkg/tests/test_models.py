import numpy as np
import pytest

from openqid.algebra import structure_table
from openqid.errors import ValidationError
from openqid.estimate import ModelEvaluator
from openqid.generator import compile_model
from openqid.models import (
    ENERGY_TRANSFER_NOMINAL,
    bose_einstein,
    builtin_model,
    describe_models,
    model_ids,
    nominal_theta,
    physical_energy_transfer_theta,
)
from openqid.xfer import lti_tf


def test_registry_parsing():
    assert builtin_model("dephasing_chain(2)").n_qubits == 2
    assert builtin_model("dephasing_chain:3").n_qubits == 3
    assert builtin_model("closed_chain").n_qubits == 2
    with pytest.raises(ValidationError):
        builtin_model("nope")
    with pytest.raises(ValidationError):
        builtin_model("energy_transfer(3)")
    assert "energy_transfer" in model_ids()
    assert len(describe_models()) == len(model_ids())


def test_nominal_values():
    assert np.array_equal(nominal_theta("energy_transfer"), ENERGY_TRANSFER_NOMINAL)
    with pytest.raises(ValidationError):
        nominal_theta("relaxation_chain_z")


def test_bose_einstein():
    assert bose_einstein(1.0, 1.0) == pytest.approx(1 / (np.e - 1))
    assert bose_einstein(10.0, 0.1) < 1e-40
    with pytest.raises(ValidationError):
        bose_einstein(-1.0, 1.0)


def test_raw_parameters_map_onto_identifiable_ones(table2):
    raw = builtin_model("energy_transfer_raw")
    red = builtin_model("energy_transfer")
    t = physical_energy_transfer_theta()
    w1, w2, d, g1, g2, g1p, g1m, g2p, g2m = t
    mapped = [w1 - w2, d, g1p + g1m, g2p + g2m, g1p - g1m, g2p - g2m, g1 + g2]
    a = ModelEvaluator(raw).system(t)
    b = ModelEvaluator(red).system(mapped)
    for out in ("z1", "z2"):
        ta, tb = lti_tf(a, out), lti_tf(b, out)
        assert np.allclose(ta.den, tb.den, atol=1e-12) and np.allclose(ta.num, tb.num, atol=1e-12)


def test_thermal_rates_relation():
    t = physical_energy_transfer_theta(kT=1.0, rate=0.02)
    # g- - g+ = rate for every qubit
    assert t[6] - t[5] == pytest.approx(0.02)
    assert t[8] - t[7] == pytest.approx(0.02)


@pytest.mark.parametrize("mid", ["energy_transfer", "closed_chain(3)", "dephasing_chain(3)", "relaxation_chain_x", "relaxation_chain_z"])
def test_canonicalization_preserves_transfer_function(mid, rng):
    m = builtin_model(mid)
    tab = structure_table(m.n_qubits)
    for _ in range(3):
        theta = m.sample_theta(rng)
        canon = m.canonicalize(theta)
        assert np.array_equal(m.canonicalize(canon), canon)
        for out in m.output_labels:
            a = lti_tf(compile_model(m, theta, tab), out)
            b = lti_tf(compile_model(m, canon, tab), out)
            assert np.allclose(a.den, b.den, atol=1e-12) and np.allclose(a.num, b.num, atol=1e-12)


def test_samplers_are_admissible(rng):
    for mid in ("energy_transfer", "energy_transfer_raw", "dephasing_chain(2)", "relaxation_chain_x", "relaxation_chain_z"):
        m = builtin_model(mid)
        basis = structure_table(m.n_qubits).basis
        for _ in range(10):
            assert m.is_admissible(m.sample_theta(rng), basis)
