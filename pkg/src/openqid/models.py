"""Built-in two-level-system models.

Every model fixes its own dissipator normalization, chosen so that the
assembled accessible system matches the reference matrices used in the
test-suite. The ``convention`` string of each model states it.

Hamiltonians share one form: a chain of qubits with local splittings and
flip-flop couplings,

    H = sum_k omega_k/2 sigma_z^k + sum_k delta_k (s+^k s-^(k+1) + s-^k s+^(k+1))

with ``s+ = |0><1|`` raising to the ``sigma_z = +1`` state.
"""

import re

import numpy as np

from .algebra import PAULI, embed, pauli_string
from .errors import ValidationError
from .generator import SIGMA_MINUS, SIGMA_PLUS, ParamModel, product_state

ENERGY_TRANSFER_NOMINAL = np.array([-1.1, 0.5, 0.0361, 0.022, -0.02, -0.0176, 0.065])

# physical settings quoted alongside the nominal rates (MHz)
ENERGY_TRANSFER_PHYSICAL = {
    "omega1": 1.3,
    "omega2": 2.4,
    "gamma1": 0.03,
    "gamma2": 0.035,
    "kT_over_omega1": 0.8,
    "base_rate": 0.02,
}


def bose_einstein(omega, kT):
    """Mean thermal occupation ``1 / (exp(omega/kT) - 1)``.

    Parameters
    ----------
    omega, kT : float
        Mode frequency and temperature in the same units, both positive.
    """
    if not omega > 0 or not kT > 0:
        raise ValidationError(f"bose_einstein needs omega > 0 and kT > 0, got {omega}, {kT}")
    return 1.0 / np.expm1(omega / kT)


def _chain_hamiltonian(omegas, deltas):
    n = len(omegas)
    H = np.zeros((2**n, 2**n), dtype=complex)
    for k, w in enumerate(omegas, start=1):
        H += 0.5 * w * embed(PAULI["Z"], k, n)
    for k, d in enumerate(deltas, start=1):
        hop = embed(SIGMA_PLUS, k, n) @ embed(SIGMA_MINUS, k + 1, n)
        H += d * (hop + hop.conj().T)
    return H


def _z_string(k, last):
    return "Z" * (k - 1) + last


def _chain_order(n):
    labels = []
    for k in range(1, n + 1):
        for last in "XY":
            labels.append(_z_string(k, last) + "I" * (n - k))
    return tuple(labels)


# ---------------------------------------------------------------------------
# sign canonicalization


def _canon_energy(theta):
    t = np.array(theta, dtype=float)
    t[0] = abs(t[0])
    t[1] = abs(t[1])
    return t


def _canon_chain(n):
    def canon(theta):
        t = np.array(theta, dtype=float)
        # H -> -H leaves the x1 trace of a real initial state unchanged
        if t[0] < 0:
            t[: 2 * n - 1] *= -1
        t[n : 2 * n - 1] = np.abs(t[n : 2 * n - 1])
        return t

    return canon


def _canon_relax_z(theta):
    t = np.array(theta, dtype=float)
    t[2] = abs(t[2])
    if t[0] - t[1] < 0:
        t[:2] *= -1
    return t


def _canon_relax_x(theta):
    t = np.array(theta, dtype=float)
    if t[0] < 0:
        t[:3] *= -1
    t[2] = abs(t[2])
    return t


# ---------------------------------------------------------------------------
# model factories


def _energy_jumps(nu, mu, gam):
    # per-qubit (nu - mu/2) D[s-] + (nu + mu/2) D[s+] + gam/2 D[sigma_z]
    out = []
    for k in (1, 2):
        out += [
            (nu[k - 1] - mu[k - 1] / 2, embed(SIGMA_MINUS, k, 2)),
            (nu[k - 1] + mu[k - 1] / 2, embed(SIGMA_PLUS, k, 2)),
            (gam[k - 1] / 2, embed(PAULI["Z"], k, 2)),
        ]
    return out


def _energy_sampler(rng):
    wd = rng.uniform(0.3, 2.0) * rng.choice([-1, 1])
    d1 = rng.uniform(0.1, 1.0)
    nu = rng.uniform(0.02, 0.3, 2)
    mu = rng.uniform(-1, 1, 2) * nu
    gs = rng.uniform(0.01, 0.3)
    return np.array([wd, d1, nu[0], nu[1], mu[0], mu[1], gs])


def energy_transfer():
    """Two qubits exchanging energy at finite temperature.

    Parameters ``(omega_d, delta1, nu1, nu2, mu1, mu2, gamma_s)`` are the
    identifiable combinations ``omega_d = omega1 - omega2``,
    ``nu_k = g_k+ + g_k-``, ``mu_k = g_k+ - g_k-`` and
    ``gamma_s = gamma1 + gamma2``. The split of ``omega_d`` and ``gamma_s``
    between the qubits is unobservable from z-traces and is fixed
    symmetrically. Observables ``sigma_z^1``, ``sigma_z^2``; initial state
    ``|0> (|0>+|1>)/sqrt2``.
    """

    def hamiltonian(t):
        return _chain_hamiltonian([t[0] / 2, -t[0] / 2], [t[1]])

    def jumps(t):
        return _energy_jumps(t[2:4], t[4:6], (t[6] / 2, t[6] / 2))

    return ParamModel(
        name="energy_transfer",
        n_qubits=2,
        theta_names=("omega_d", "delta1", "nu1", "nu2", "mu1", "mu2", "gamma_s"),
        hamiltonian=hamiltonian,
        jumps=jumps,
        observables=(("z1", pauli_string("ZI")), ("z2", pauli_string("IZ"))),
        initial_state=product_state("0+"),
        theta_nominal=ENERGY_TRANSFER_NOMINAL.copy(),
        sampler=_energy_sampler,
        display_order=("ZI", "IZ", "XX", "XY", "YX", "YY"),
        canonicalize=_canon_energy,
        sign_ambiguous=("omega_d", "delta1"),
        convention="per qubit: (nu-mu/2) D[s-] + (nu+mu/2) D[s+] + (gamma_k/2) D[sigma_z], gamma_k = gamma_s/2",
    )


def energy_transfer_raw():
    """Energy-transfer model in its nine physical parameters.

    ``(omega1, omega2, delta1, gamma1, gamma2, g1p, g1m, g2p, g2m)``; mapped to
    the same dissipator as :func:`energy_transfer` with ``nu = g+ + g-`` and
    ``mu = g+ - g-``. Useful for simulating from physical settings and for
    exhibiting the unidentifiable directions.
    """

    def hamiltonian(t):
        return _chain_hamiltonian([t[0], t[1]], [t[2]])

    def jumps(t):
        nu = (t[5] + t[6], t[7] + t[8])
        mu = (t[5] - t[6], t[7] - t[8])
        return _energy_jumps(nu, mu, (t[3], t[4]))

    def sampler(rng):
        return np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(0.1, 1, 1), rng.uniform(0.01, 0.2, 6)])

    def canon(t):
        t = np.array(t, dtype=float)
        t[2] = abs(t[2])
        return t

    return ParamModel(
        name="energy_transfer_raw",
        n_qubits=2,
        theta_names=("omega1", "omega2", "delta1", "gamma1", "gamma2", "g1p", "g1m", "g2p", "g2m"),
        hamiltonian=hamiltonian,
        jumps=jumps,
        observables=(("z1", pauli_string("ZI")), ("z2", pauli_string("IZ"))),
        initial_state=product_state("0+"),
        theta_nominal=None,
        sampler=sampler,
        display_order=("ZI", "IZ", "XX", "XY", "YX", "YY"),
        canonicalize=canon,
        sign_ambiguous=("delta1",),
        convention="as energy_transfer with nu = g+ + g-, mu = g+ - g-",
    )


def physical_energy_transfer_theta(omega1=1.3, omega2=2.4, gamma1=0.03, gamma2=0.035, delta1=0.5, kT=None, rate=0.02):
    """Raw parameters from thermal rates ``g+ = rate*n(omega)``, ``g- = rate*(n(omega)+1)``.

    ``kT`` defaults to ``0.8 * omega1``.
    """
    kT = 0.8 * omega1 if kT is None else kT
    n1 = bose_einstein(omega1, kT)
    n2 = bose_einstein(omega2, kT)
    return np.array(
        [omega1, omega2, delta1, gamma1, gamma2, rate * n1, rate * (n1 + 1), rate * n2, rate * (n2 + 1)]
    )


def closed_chain(n=2):
    """Closed spin chain: ``theta = (omega_1..omega_n, delta_1..delta_{n-1})``.

    Measures ``sigma_x^1`` from ``(|0>+|1>)/sqrt2 |0...0>``.
    """
    _check_chain(n, lo=1)
    names = tuple(f"omega{k}" for k in range(1, n + 1)) + tuple(f"delta{k}" for k in range(1, n))

    def hamiltonian(t):
        return _chain_hamiltonian(t[:n], t[n:])

    def sampler(rng):
        return np.concatenate([rng.uniform(-2, 2, n), rng.uniform(0.1, 1.0, n - 1)])

    return ParamModel(
        name=f"closed_chain({n})",
        n_qubits=n,
        theta_names=names,
        hamiltonian=hamiltonian,
        jumps=lambda t: [],
        observables=(("x1", embed(PAULI["X"], 1, n)),),
        initial_state=product_state("+" + "0" * (n - 1)),
        sampler=sampler,
        display_order=_chain_order(n),
        canonicalize=_canon_chain(n),
        sign_ambiguous=names,
        convention="no dissipation",
    )


def dephasing_chain(n=3):
    """Spin chain with independent dephasing ``(gamma_k/2) D[sigma_z^k]``.

    ``theta = (omega_1..omega_n, delta_1..delta_{n-1}, gamma_1..gamma_n)``.
    With this normalization the transverse coordinates of qubit ``k`` decay
    at rate ``gamma_k``.
    """
    _check_chain(n, lo=1)
    names = (
        tuple(f"omega{k}" for k in range(1, n + 1))
        + tuple(f"delta{k}" for k in range(1, n))
        + tuple(f"gamma{k}" for k in range(1, n + 1))
    )

    def hamiltonian(t):
        return _chain_hamiltonian(t[:n], t[n : 2 * n - 1])

    def jumps(t):
        return [(t[2 * n - 1 + k] / 2, embed(PAULI["Z"], k + 1, n)) for k in range(n)]

    def sampler(rng):
        return np.concatenate([rng.uniform(-2, 2, n), rng.uniform(0.1, 1.0, n - 1), rng.uniform(0.01, 0.5, n)])

    return ParamModel(
        name=f"dephasing_chain({n})",
        n_qubits=n,
        theta_names=names,
        hamiltonian=hamiltonian,
        jumps=jumps,
        observables=(("x1", embed(PAULI["X"], 1, n)),),
        initial_state=product_state("+" + "0" * (n - 1)),
        sampler=sampler,
        display_order=_chain_order(n),
        canonicalize=_canon_chain(n),
        sign_ambiguous=names[: 2 * n - 1],
        convention="(gamma_k/2) D[sigma_z^k]",
    )


def _relax_sampler(rng):
    return np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(0.1, 1.0, 1), rng.uniform(0.01, 0.3, 2)])


def relaxation_chain_x():
    """Two-qubit chain with pure relaxation ``2 g_k D[s-^k]``, measuring ``sigma_x^1``.

    ``theta = (omega1, omega2, delta1, g1, g2)``; initial state
    ``(|0>+|1>)/sqrt2 |0>``.
    """

    def hamiltonian(t):
        return _chain_hamiltonian(t[:2], t[2:3])

    def jumps(t):
        return [(2 * t[3], embed(SIGMA_MINUS, 1, 2)), (2 * t[4], embed(SIGMA_MINUS, 2, 2))]

    return ParamModel(
        name="relaxation_chain_x",
        n_qubits=2,
        theta_names=("omega1", "omega2", "delta1", "g1", "g2"),
        hamiltonian=hamiltonian,
        jumps=jumps,
        observables=(("x1", pauli_string("XI")),),
        initial_state=product_state("+0"),
        sampler=_relax_sampler,
        display_order=("XI", "YI", "IX", "IY", "XZ", "YZ", "ZX", "ZY"),
        canonicalize=_canon_relax_x,
        sign_ambiguous=("omega1", "omega2", "delta1"),
        convention="2 g_k D[s-^k]",
    )


def relaxation_chain_z():
    """Two-qubit relaxation chain measuring ``sigma_z^1``.

    ``theta = (omega1, omega2, delta1, g1, g2)``. The dissipator
    ``(3 g_k/2) D[s-^k] + (g_k/2) D[s+^k]`` gives population decay at
    ``2 g_k`` and forcing ``-g_k`` on ``<sigma_z^k>``. Only
    ``omega1 - omega2`` enters the z-trace.
    """

    def hamiltonian(t):
        return _chain_hamiltonian(t[:2], t[2:3])

    def jumps(t):
        out = []
        for k in (1, 2):
            g = t[2 + k]
            out += [(1.5 * g, embed(SIGMA_MINUS, k, 2)), (0.5 * g, embed(SIGMA_PLUS, k, 2))]
        return out

    return ParamModel(
        name="relaxation_chain_z",
        n_qubits=2,
        theta_names=("omega1", "omega2", "delta1", "g1", "g2"),
        hamiltonian=hamiltonian,
        jumps=jumps,
        observables=(("z1", pauli_string("ZI")),),
        initial_state=product_state("+0"),
        sampler=_relax_sampler,
        display_order=("ZI", "IZ", "XX", "XY", "YX", "YY"),
        canonicalize=_canon_relax_z,
        sign_ambiguous=("omega1", "omega2", "delta1"),
        convention="(3 g_k/2) D[s-^k] + (g_k/2) D[s+^k]",
        meta={"invariant_shifts": [("omega1", "omega2")]},
    )


def _check_chain(n, lo):
    if not isinstance(n, (int, np.integer)) or not lo <= n <= 4:
        raise ValidationError(f"chain length must be an integer in {lo}..4, got {n!r}")


_FACTORIES = {
    "energy_transfer": energy_transfer,
    "energy_transfer_raw": energy_transfer_raw,
    "closed_chain": closed_chain,
    "dephasing_chain": dephasing_chain,
    "relaxation_chain_x": relaxation_chain_x,
    "relaxation_chain_z": relaxation_chain_z,
}
_SIZED = {"closed_chain", "dephasing_chain"}
_ID_RE = re.compile(r"^([a-z_]+)(?:\((\d+)\)|:(\d+))?$")


def model_ids():
    """Registered model ids (chains take a size: ``closed_chain(3)``)."""
    return tuple(f"{k}(n)" if k in _SIZED else k for k in _FACTORIES)


def builtin_model(model_id):
    """Look up a built-in model by id, e.g. ``"energy_transfer"`` or ``"dephasing_chain(3)"``."""
    m = _ID_RE.match(str(model_id).strip())
    if not m or m.group(1) not in _FACTORIES:
        raise ValidationError(f"unknown model id {model_id!r}; known: {', '.join(model_ids())}")
    name, size = m.group(1), m.group(2) or m.group(3)
    if size is not None:
        if name not in _SIZED:
            raise ValidationError(f"model {name} does not take a size")
        return _FACTORIES[name](int(size))
    return _FACTORIES[name]()


def nominal_theta(model_id):
    """Reference parameter vector of a built-in model."""
    model = builtin_model(model_id)
    if model.theta_nominal is None:
        raise ValidationError(f"model {model.name} has no nominal parameters")
    return model.theta_nominal.copy()


def describe_models():
    """One row per registered model: id, parameter names, convention."""
    rows = []
    for mid in _FACTORIES:
        model = builtin_model(mid)
        rows.append((model_ids()[list(_FACTORIES).index(mid)], model.theta_names, model.convention))
    return rows
