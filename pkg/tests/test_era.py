import numpy as np
import pytest
import scipy.linalg as sla

from openqid.algebra import structure_table
from openqid.dynamics import TraceSet, simulate_traces
from openqid.era import (
    HankelOperator,
    OrderPolicy,
    build_hankel,
    dump_singular_values,
    era_from_traces,
    era_realize,
    to_continuous,
)
from openqid.errors import BranchCutError, DegenerateSignalError, ValidationError
from openqid.generator import compile_model
from openqid.models import builtin_model


@pytest.fixture(scope="module")
def traces():
    m = builtin_model("energy_transfer")
    s = compile_model(m, m.theta_nominal, structure_table(2))
    return simulate_traces(s, 0.01, 3000)


def test_hankel_layout():
    y = np.arange(20, dtype=float).reshape(2, 10)
    H = build_hankel(y, 3, 4, k=1)
    assert H.shape == (6, 4)
    # block (i, l) holds y[:, i + l + k]
    assert np.array_equal(H[2:4, 1], y[:, 1 + 1 + 1])
    Hg = build_hankel(y, 2, 2, row_offsets=[3], col_offsets=[2])
    assert np.array_equal(Hg[2:4, 1], y[:, 5])
    # full offset list including the leading zero is accepted too
    assert np.array_equal(build_hankel(y, 2, 2, row_offsets=[0, 3], col_offsets=[2]), Hg)


def test_hankel_errors():
    y = np.zeros((1, 5))
    with pytest.raises(ValidationError):
        build_hankel(y, 3, 4)
    with pytest.raises(ValidationError):
        build_hankel(np.zeros((1, 50)), 3, 3, row_offsets=[2, 1])
    with pytest.raises(ValidationError):
        build_hankel(np.zeros((1, 50)), 3, 3, row_offsets=[1, 2, 3, 4])


def test_matrix_free_operator_matches_dense(rng):
    y = rng.standard_normal((2, 40))
    op = HankelOperator(y, 12, 15, k=1)
    H = build_hankel(y, 12, 15, k=1)
    assert np.allclose(op.dense(), H)
    v = rng.standard_normal(15)
    u = rng.standard_normal(24)
    assert np.allclose(op.matvec(v), H @ v)
    assert np.allclose(op.rmatvec(u), H.T @ u)


def test_rank_and_reproduction(traces):
    real = era_from_traces(traces, 600, 600)
    assert real.order == 5
    sv = real.singular_values
    assert sv[4] / sv[0] > 1e-6 > sv[5] / sv[0]
    y = real.outputs(traces.n_steps + 1)
    assert np.abs(y - traces.values).max() < 1e-8


def test_truncated_matches_dense(traces):
    dense = era_from_traces(traces, 800, 800, OrderPolicy.fixed(5), method="dense")
    trunc = era_from_traces(traces, 800, 800, OrderPolicy.fixed(5), method="truncated")
    assert np.allclose(trunc.singular_values[:5], dense.singular_values[:5], rtol=1e-9)
    # realizations differ by a similarity; compare invariants
    assert np.allclose(np.sort_complex(np.linalg.eigvals(trunc.Ad_hat)), np.sort_complex(np.linalg.eigvals(dense.Ad_hat)))
    assert np.abs(trunc.outputs(500) - traces.values[:, :500]).max() < 1e-8


def test_truncated_needs_fixed_order(traces):
    with pytest.raises(ValidationError):
        era_from_traces(traces, 100, 100, OrderPolicy.threshold(), method="truncated")
    with pytest.raises(ValidationError):
        era_from_traces(traces, 100, 100, OrderPolicy.model())


def test_continuous_roundtrip(traces):
    real = to_continuous(era_from_traces(traces, 500, 500, OrderPolicy.fixed(5)))
    E = sla.expm(real.A_hat * real.dt)
    assert np.abs(E - real.Ad_hat).max() / np.abs(real.Ad_hat).max() < 1e-9


def test_branch_cut_is_reported():
    # a pure oscillation sampled at exactly half its period lands on -1
    t = np.arange(40)
    y = np.cos(np.pi * t)[None, :]
    real = era_from_traces(TraceSet(dt=1.0, values=y, labels=("y",)), 10, 10)
    with pytest.raises(BranchCutError, match="reduce the sampling period"):
        to_continuous(real)


def test_degenerate_signals():
    zero = TraceSet(dt=0.1, values=np.zeros((1, 50)), labels=("y",))
    with pytest.raises(DegenerateSignalError):
        era_from_traces(zero, 10, 10)
    decay = TraceSet(dt=0.1, values=np.exp(-0.3 * 0.1 * np.arange(50))[None, :], labels=("y",))
    with pytest.raises(DegenerateSignalError):
        era_from_traces(decay, 10, 10, OrderPolicy.fixed(3))


def test_order_policies():
    sv = np.array([1.0, 0.5, 1e-3, 1e-17])
    assert OrderPolicy.threshold().select(sv, (10, 10)) == 3
    assert OrderPolicy.threshold(1e-2).select(sv, (10, 10)) == 2
    assert OrderPolicy.fixed(2).select(sv, (10, 10)) == 2
    with pytest.raises(ValidationError):
        OrderPolicy.fixed(0)
    with pytest.raises(ValidationError):
        OrderPolicy("magic")
    with pytest.raises(ValidationError):
        OrderPolicy.fixed(9).select(sv, (10, 10))


def test_era_realize_shape_checks():
    with pytest.raises(ValidationError):
        era_realize(np.zeros((4, 4)), np.zeros((4, 3)), 1)
    with pytest.raises(ValidationError):
        era_realize(np.ones((5, 4)), np.ones((5, 4)), 2)


def test_dump_singular_values(tmp_path, traces):
    real = era_from_traces(traces, 50, 50)
    p = tmp_path / "sv.csv"
    dump_singular_values(real, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "index,sigma,ratio"
    assert len(lines) == 51
    assert lines[1].endswith(",1.0")
