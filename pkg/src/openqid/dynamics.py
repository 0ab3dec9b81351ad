"""Sampled output traces of affine LTI systems, noise injection and a
density-matrix reference integrator."""

import contextlib
import csv
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .errors import IntegrationError, ValidationError

log = logging.getLogger(__name__)

TRACE_DRIFT_TOL = 1e-8


def _open_out(target):
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w", newline="")


@dataclass(frozen=True, eq=False)
class TraceSet:
    """Output samples ``values[i, j] = y_i(j dt)`` for ``j = 0..n_steps``."""

    dt: float
    values: np.ndarray
    labels: tuple
    noise_sigma: float | None = None
    seed: int | None = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("trace values must be finite")
        if len(self.labels) != v.shape[0]:
            raise ValidationError(f"{len(self.labels)} labels for {v.shape[0]} traces")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_steps(self):
        return self.values.shape[1] - 1

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    def select(self, labels):
        """Sub-set of the traces, in the given order."""
        if isinstance(labels, str):
            labels = [labels]
        try:
            idx = [self.labels.index(lab) for lab in labels]
        except ValueError:
            raise ValidationError(f"traces {self.labels} do not contain all of {list(labels)}") from None
        return replace(self, values=self.values[idx], labels=tuple(labels))

    def to_csv(self, path):
        """Write ``t,<label...>`` rows to a path or an open text file."""
        with _open_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *self.labels])
            for t, row in zip(self.times, self.values.T):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path):
        """Read a trace CSV; the sampling period is inferred from the ``t`` column."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0].strip() != "t":
            raise ValidationError(f"{path}:1: header must start with 't'")
        labels = tuple(h.strip() for h in rows[0][1:])
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(labels) + 1:
                raise ValidationError(f"{path}:{lineno}: expected {len(labels) + 1} fields, got {len(row)}")
            try:
                data.append([float(v) for v in row])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
        data = np.array(data)
        if len(data) < 2:
            raise ValidationError(f"{path}: need at least two samples")
        steps = np.diff(data[:, 0])
        dt = float(np.mean(steps))
        if np.abs(steps - dt).max() > 1e-6 * max(dt, 1.0):
            raise ValidationError(f"{path}: samples are not uniformly spaced")
        return cls(dt=dt, values=data[:, 1:].T.copy(), labels=labels)


def discretize(A, b, dt):
    """Exact zero-order step ``x -> Ad x + bd`` from the augmented exponential."""
    K = A.shape[0]
    aug = np.zeros((K + 1, K + 1))
    aug[:K, :K] = A
    aug[:K, K] = b
    E = sla.expm(aug * dt)
    if not np.all(np.isfinite(E)):
        raise IntegrationError("matrix exponential is not finite")
    return E[:K, :K], E[:K, K]


def sampling_limit(A):
    """Largest ``dt`` passing the ``pi / (4 max|Im eig|)`` guidance (inf if non-oscillatory)."""
    wmax = np.abs(np.linalg.eigvals(A).imag).max() if A.size else 0.0
    return np.inf if wmax == 0 else np.pi / (4 * wmax)


def check_sampling(A, dt):
    """Warn when ``dt`` is too coarse for the fastest oscillation of ``A``."""
    limit = sampling_limit(A)
    if dt > limit:
        warnings.warn(
            f"dt = {dt:g} exceeds pi/(4 max|Im eig|) = {limit:.4g}; discrete realizations may alias",
            RuntimeWarning,
            stacklevel=2,
        )
        return False
    return True


def simulate_traces(lti, dt, n_steps):
    """Noiseless samples ``y(j) = c x(j dt)``, ``j = 0..n_steps``.

    Parameters
    ----------
    lti : AffineLTI
        Usually the restricted system; the full one works identically.
    dt : float
        Sampling period.
    n_steps : int
        Number of steps; the result has ``n_steps + 1`` samples.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise ValidationError("n_steps must be non-negative")
    Ad, bd = discretize(lti.A, lti.b, dt)
    y = _kernels.affine_steps(Ad, bd, lti.x0, lti.c, n_steps)
    labels = lti.output_labels or tuple(f"y{i + 1}" for i in range(lti.c.shape[0]))
    return TraceSet(dt=float(dt), values=y, labels=labels)


def add_noise(traces, sigma, seed=None, rng=None):
    """Add i.i.d. ``Normal(0, sigma^2)`` noise to every sample.

    Either ``seed`` (anything accepted by ``numpy.random.default_rng``) or an
    explicit ``rng`` generator gives the stream.
    """
    if sigma < 0:
        raise ValidationError(f"noise sigma must be non-negative, got {sigma}")
    if rng is None:
        rng = np.random.default_rng(seed)
    noisy = traces.values + sigma * rng.standard_normal(traces.values.shape) if sigma > 0 else traces.values.copy()
    return replace(
        traces,
        values=noisy,
        noise_sigma=float(sigma),
        seed=seed if isinstance(seed, (int, np.integer)) else None,
    )


def _superoperator(H, jumps):
    # row-major vec: vec(A rho B) = kron(A, B^T) vec(rho)
    N = H.shape[0]
    eye = np.eye(N)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, J in jumps:
        JdJ = J.conj().T @ J
        L += rate * (np.kron(J, J.conj()) - 0.5 * np.kron(JdJ, eye) - 0.5 * np.kron(eye, JdJ.T))
    return L


def _jumps_from_G(G, basis):
    # diagonalize G so the dissipator becomes a sum of ordinary jump terms
    w, V = np.linalg.eigh(G)
    F = basis.elements
    return [(float(wk), np.tensordot(V[:, k], F, axes=1)) for k, wk in enumerate(w) if abs(wk) > 1e-15]


def reference_master_equation(model, theta, dt, n_steps, substeps=20, basis=None):
    """Integrate the density matrix directly with classic RK4 at ``dt/substeps``.

    Independent of the structure-constant machinery; used as a test oracle.
    Raises :class:`IntegrationError` if ``|tr rho - 1|`` drifts above 1e-8.
    """
    theta = model.check_theta(theta)
    H = np.asarray(model.hamiltonian(theta), dtype=complex)
    if model.lindblad is not None:
        if basis is None:
            from .algebra import pauli_basis

            basis = pauli_basis(model.n_qubits)
        jumps = _jumps_from_G(model.lindblad_matrix(theta, basis), basis)
    else:
        jumps = list(model.jumps(theta)) if model.jumps else []
    L = _superoperator(H, jumps)
    N = H.shape[0]
    obs = [O for _, O in model.observables]
    # y = tr(O rho) = sum_ab O_ba rho_ab ; last row tracks the trace
    rows = np.array([O.T.reshape(-1) for O in obs] + [np.eye(N).reshape(-1)])
    rho0 = np.asarray(model.initial_state, dtype=complex).reshape(-1)
    out = _kernels.rk4_linear(L, rho0, dt / substeps, n_steps, substeps, rows)
    drift = np.abs(out[-1] - 1).max()
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(f"density-matrix trace drifted by {drift:.2e}")
    return TraceSet(dt=float(dt), values=out[:-1].real.copy(), labels=model.output_labels)
