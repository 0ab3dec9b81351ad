"""Lindblad models compiled to affine LTI systems on the coherence vector.

A :class:`ParamModel` maps a parameter vector ``theta`` to a Hamiltonian and
a set of jump operators (or, for synthetic models, directly to the Lindblad
coefficient matrix ``G``). :func:`assemble_generator` turns it into

    dx/dt = A x + b,   y = c x,   x_n = tr(F_n rho)

and :func:`accessible_set` / :func:`restrict` cut that system down to the
smallest closed block containing the measured coordinates.
"""

import json
import logging
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import PAULI, embed, expand_operator, pauli_string
from .errors import ConsistencyError, ValidationError

log = logging.getLogger(__name__)

ACCESS_TOL = 1e-12
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, raises to sigma_z = +1
SIGMA_MINUS = SIGMA_PLUS.T.copy()


@dataclass(frozen=True, eq=False)
class ParamModel:
    """A parameterized Lindblad model with its measurement setup.

    ``hamiltonian(theta)`` returns the ``N x N`` Hamiltonian. Dissipation is
    given either by ``jumps(theta) -> [(rate, L), ...]`` (terms
    ``rate * (L rho L^+ - {L^+ L, rho}/2)``) or by ``lindblad(theta, basis)``
    returning ``G`` directly.
    """

    name: str
    n_qubits: int
    theta_names: tuple
    hamiltonian: Callable
    observables: tuple  # ((label, matrix), ...)
    initial_state: np.ndarray
    jumps: Callable | None = None
    lindblad: Callable | None = None
    theta_nominal: np.ndarray | None = None
    sampler: Callable | None = None
    display_order: tuple | None = None
    canonicalize: Callable | None = None
    sign_ambiguous: tuple = ()
    convention: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return 2**self.n_qubits

    @property
    def output_labels(self):
        return tuple(lab for lab, _ in self.observables)

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.theta_names),):
            raise ValidationError(
                f"{self.name}: theta must have length {len(self.theta_names)}, got shape {theta.shape}"
            )
        return theta

    def ham_coeffs(self, theta, basis):
        """Real expansion ``h_m = tr(H F_m)`` of the Hamiltonian."""
        return expand_operator(self.hamiltonian(self.check_theta(theta)), basis)

    def lindblad_matrix(self, theta, basis):
        """Hermitian coefficient matrix ``G`` in ``basis``."""
        theta = self.check_theta(theta)
        if self.lindblad is not None:
            G = np.asarray(self.lindblad(theta, basis), dtype=complex)
        else:
            m = len(basis)
            G = np.zeros((m, m), dtype=complex)
            for rate, L in self.jumps(theta) if self.jumps else ():
                l = np.einsum("jab,ba->j", basis.elements, L)
                G += rate * np.outer(l, l.conj())
        if np.abs(G - G.conj().T).max() > 1e-12:
            raise ValidationError(f"{self.name}: Lindblad matrix is not Hermitian")
        return G

    def is_admissible(self, theta, basis):
        """True when ``G(theta)`` is positive semidefinite to 1e-10."""
        G = self.lindblad_matrix(theta, basis)
        return bool(np.linalg.eigvalsh(G).min() >= -1e-10)

    def sample_theta(self, rng):
        """Random admissible parameter vector (generic point for structure checks)."""
        if self.sampler is not None:
            return np.asarray(self.sampler(rng), dtype=float)
        return rng.uniform(0.1, 1.0, len(self.theta_names))

    def output_index(self, label):
        try:
            return self.output_labels.index(label)
        except ValueError:
            raise ValidationError(f"{self.name} has no output {label!r}") from None

    def with_initial_state(self, rho):
        return replace(self, initial_state=np.asarray(rho, dtype=complex))


@dataclass(frozen=True, eq=False)
class AffineLTI:
    """Real affine system ``x' = A x + b``, ``y = c x`` with initial state ``x0``.

    ``units`` is ``"normalized"`` for ``x_n = tr(F_n rho)`` and ``"pauli"``
    for expectation values of unnormalized Pauli strings (``sqrt(N)`` times
    larger). Outputs ``c x`` do not depend on the choice.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x0: np.ndarray
    state_labels: tuple = ()
    output_labels: tuple = ()
    accessible_indices: tuple | None = None
    units: str = "normalized"

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def restricted(self):
        return self.accessible_indices is not None

    def output_row(self, label):
        """Return a single-output copy keeping the named output only."""
        i = self.output_labels.index(label)
        return replace(self, c=self.c[i : i + 1], output_labels=(label,))


def coherence_vector(rho, basis):
    """Coherence vector ``x_n = tr(F_n rho)`` of a density matrix."""
    N = basis.dim
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (N, N):
        raise ValidationError(f"density matrix must be {N}x{N}, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-10:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValidationError(f"density matrix trace is {np.trace(rho).real:.3g}, not 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValidationError("density matrix is not positive semidefinite")
    x = np.einsum("nab,ba->n", basis.elements, rho).real
    assert np.linalg.norm(x) <= np.sqrt((N - 1) / N) + 1e-10
    return x


def assemble_generator(model, theta, table):
    """Build the full coherence-vector system of ``model`` at ``theta``.

    ``A = Q + R`` and ``b`` follow the structure-constant formulas::

        Q_np = sum_m C_mnp h_m
        R_np = -1/4 sum_jkl g_jk (C_njl (C_klp + D_klp) + C_knl (C_ljp + D_ljp))
        b_n  = 1/N sum_jk Im(g_jk) C_njk

    with ``D = i d`` the imaginary anticommutator table.
    """
    basis = table.basis
    if basis.n_qubits != model.n_qubits:
        raise ValidationError(
            f"structure table is for {basis.n_qubits} qubits, model {model.name} has {model.n_qubits}"
        )
    theta = model.check_theta(theta)
    h = model.ham_coeffs(theta, basis)
    G = model.lindblad_matrix(theta, basis)
    m = len(basis)
    N = basis.dim

    C_first = table.slices("C", 0)
    C_mid = table.slices("C", 1)
    d_first = table.slices("d", 0)
    d_mid = table.slices("d", 1)

    A = np.zeros((m, m), dtype=complex)
    for mm in np.flatnonzero(np.abs(h) > 0):
        A += h[mm] * C_first[mm].toarray()

    b = np.zeros(m)
    for j, k in np.argwhere(np.abs(G) > 1e-15):
        g = G[j, k]
        E_first = C_first[k] + 1j * d_first[k]
        E_mid = C_mid[j] + 1j * d_mid[j]
        A += -0.25 * g * (C_mid[j] @ E_first + C_first[k] @ E_mid).toarray()
        if g.imag != 0.0:
            b += (g.imag / N) * C_mid[j][:, [k]].toarray().ravel()

    scale = max(1.0, np.abs(A).max())
    if np.abs(A.imag).max() > 1e-10 * scale:
        raise ConsistencyError(f"{model.name}: generator has imaginary residue {np.abs(A.imag).max():.2e}")

    c = np.array([expand_operator(O, basis) for _, O in model.observables])
    x0 = coherence_vector(model.initial_state, basis)
    return AffineLTI(
        A=A.real.copy(),
        b=b,
        c=c,
        x0=x0,
        state_labels=basis.labels,
        output_labels=model.output_labels,
    )


def accessible_set(lti, tol=ACCESS_TOL):
    """Smallest index set holding the measured coordinates and closed under ``A``.

    Index ``p`` joins the set whenever some member ``n`` has ``|A[n, p]| > tol``.
    The result is sorted.
    """
    A = np.asarray(lti.A)
    absA = np.abs(A)
    near = (absA > tol) & (absA <= 10 * tol)
    seed = np.flatnonzero(np.any(np.abs(lti.c) > tol, axis=0))
    members = set(int(i) for i in seed)
    frontier = list(members)
    while frontier:
        n = frontier.pop()
        if near[n].any():
            warnings.warn(
                f"coupling from coordinate {n} within 10x of the zero tolerance; "
                "accessible set may depend on the parameter point",
                RuntimeWarning,
                stacklevel=2,
            )
        for p in np.flatnonzero(absA[n] > tol):
            if int(p) not in members:
                members.add(int(p))
                frontier.append(int(p))
    return sorted(members)


def restrict(lti, indices, pauli_units=True, tol=ACCESS_TOL):
    """Sub-system on a closed index set.

    ``indices`` may be integers or basis labels, in any order; the restricted
    coordinates follow that order. With ``pauli_units`` the state is rescaled
    to unnormalized Pauli expectation values.
    """
    if len(indices) and isinstance(indices[0], str):
        indices = [lti.state_labels.index(lab) for lab in indices]
    idx = np.asarray(indices, dtype=int)
    if len(set(idx.tolist())) != len(idx):
        raise ValidationError("restriction indices contain duplicates")
    outside = np.setdiff1d(np.arange(lti.order), idx)
    if outside.size:
        leak = np.abs(lti.A[np.ix_(idx, outside)]).max()
        if leak > tol:
            raise ValidationError(f"index set is not closed under A (leak {leak:.2e})")
        if np.abs(lti.c[:, outside]).max() > tol:
            raise ValidationError("outputs depend on coordinates outside the index set")
    s = 1.0
    if pauli_units and lti.units == "normalized":
        n_qubits = round(np.log2(lti.order + 1) / 2)
        s = np.sqrt(2.0**n_qubits)
    base = lti.accessible_indices
    kept = tuple(int(base[i]) if base is not None else int(i) for i in idx)
    return AffineLTI(
        A=lti.A[np.ix_(idx, idx)].copy(),
        b=lti.b[idx] * s,
        c=lti.c[:, idx] / s,
        x0=lti.x0[idx] * s,
        state_labels=tuple(lti.state_labels[i] for i in idx) if lti.state_labels else (),
        output_labels=lti.output_labels,
        accessible_indices=kept,
        units="pauli" if (pauli_units or lti.units == "pauli") else "normalized",
    )


def compile_model(model, theta, table, order=None, pauli_units=True):
    """Assemble and restrict in one go.

    ``order`` selects the coordinate order: ``"display"`` uses the model's
    declared display order when it has one, ``None`` the sorted accessible set.
    """
    full = assemble_generator(model, theta, table)
    if order == "display" and model.display_order:
        idx = [full.state_labels.index(lab) for lab in model.display_order]
    elif order is None or order == "display":
        idx = accessible_set(full)
    else:
        idx = list(order)
    return restrict(full, idx, pauli_units=pauli_units)


def generic_accessible_set(model, table, seed=0):
    """Accessible set evaluated at a random admissible parameter point."""
    rng = np.random.default_rng(seed)
    theta = model.sample_theta(rng)
    return accessible_set(assemble_generator(model, theta, table))


# ---------------------------------------------------------------------------
# JSON model documents

_SINGLE = {"lowering": SIGMA_MINUS, "raising": SIGMA_PLUS, "dephasing": PAULI["Z"]}
_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def product_state(tag):
    """Density matrix of a product state such as ``"0+"`` (one symbol per qubit).

    Symbols: ``0 1 + - r l`` (``r``/``l`` are the +/- eigenstates of sigma_y).
    """
    psi = np.ones(1, dtype=complex)
    for ch in tag:
        try:
            psi = np.kron(psi, _KETS[ch])
        except KeyError:
            raise ValidationError(f"unknown single-qubit state symbol {ch!r} in {tag!r}") from None
    return np.outer(psi, psi.conj())


def _linear(spec, names, where):
    if isinstance(spec, (int, float)):
        return lambda theta, v=float(spec): v
    if not isinstance(spec, dict):
        raise ValidationError(f"{where}: coefficient must be a number or {{param: scale}} map")
    terms = []
    for key, scale in spec.items():
        if key == "const":
            terms.append((None, float(scale)))
        elif key in names:
            terms.append((names.index(key), float(scale)))
        else:
            raise ValidationError(f"{where}: unknown parameter {key!r}")

    def f(theta):
        return sum(s * (1.0 if i is None else theta[i]) for i, s in terms)

    return f


def model_from_dict(doc):
    """Build a :class:`ParamModel` from a JSON-style document.

    Schema (all keys required unless noted)::

        {
          "name": "my_model",
          "n_qubits": 2,
          "parameters": ["w1", "g1"],
          "hamiltonian": [{"pauli": "ZI", "coeff": {"w1": 0.5}}],
          "dissipators": [{"type": "lowering", "qubit": 1, "rate": {"g1": 2.0}},
                          {"type": "pauli", "pauli": "ZZ", "rate": 0.01}],
          "observables": ["ZI", "IZ"],
          "initial_state": "0+",
          "nominal": [1.0, 0.05]            # optional
        }

    Coefficients and rates are linear in the parameters: a number, or a map
    from parameter name (or ``"const"``) to its multiplier. Dissipator types
    are ``lowering``, ``raising`` and ``dephasing`` (sigma_-, sigma_+,
    sigma_z on one qubit) or ``pauli`` (an arbitrary Pauli string).
    """
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a JSON object")
    try:
        return _model_from_dict(doc)
    except KeyError as exc:
        raise ValidationError(f"model document missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model document: {exc}") from None


def _model_from_dict(doc):
    try:
        name = str(doc["name"])
        n = int(doc["n_qubits"])
        names = tuple(doc["parameters"])
        ham_terms = doc.get("hamiltonian", [])
        diss = doc.get("dissipators", [])
        obs = doc["observables"]
        init = doc["initial_state"]
    except KeyError as exc:
        raise ValidationError(f"model document missing key {exc}") from None
    if not 1 <= n <= 4:
        raise ValidationError(f"n_qubits must be in 1..4, got {n}")

    ham = []
    for i, term in enumerate(ham_terms):
        label = term["pauli"]
        if len(label) != n:
            raise ValidationError(f"hamiltonian[{i}]: Pauli string {label!r} has wrong length")
        ham.append((_linear(term["coeff"], names, f"hamiltonian[{i}]"), pauli_string(label)))

    jumps = []
    for i, term in enumerate(diss):
        kind = term.get("type")
        if kind in _SINGLE:
            op = embed(_SINGLE[kind], int(term["qubit"]), n)
        elif kind == "pauli":
            if len(term["pauli"]) != n:
                raise ValidationError(f"dissipators[{i}]: Pauli string has wrong length")
            op = pauli_string(term["pauli"])
        else:
            raise ValidationError(f"dissipators[{i}]: unknown type {kind!r}")
        jumps.append((_linear(term["rate"], names, f"dissipators[{i}]"), op))

    observables = []
    for lab in obs:
        if len(lab) != n:
            raise ValidationError(f"observable {lab!r} has wrong length")
        observables.append((lab, pauli_string(lab)))

    if isinstance(init, str):
        if len(init) != n:
            raise ValidationError(f"initial_state {init!r} must have one symbol per qubit")
        rho0 = product_state(init)
    else:
        rho0 = np.asarray(init, dtype=complex)

    N = 2**n

    def hamiltonian(theta):
        H = np.zeros((N, N), dtype=complex)
        for f, P in ham:
            H += f(theta) * P
        return H

    def jump_list(theta):
        return [(f(theta), L) for f, L in jumps]

    nominal = doc.get("nominal")
    return ParamModel(
        name=name,
        n_qubits=n,
        theta_names=names,
        hamiltonian=hamiltonian,
        jumps=jump_list,
        observables=tuple(observables),
        initial_state=rho0,
        theta_nominal=None if nominal is None else np.asarray(nominal, dtype=float),
        convention="user-defined (JSON)",
        meta={"source": "json", "doc": doc},
    )


def load_model_json(path):
    """Read a model document from ``path`` (see :func:`model_from_dict`)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return model_from_dict(doc)
