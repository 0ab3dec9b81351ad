"""Parameter estimation by transfer-function coefficient matching.

The pipeline for one estimate:

1. pick the traces for the estimation mode and build Hankel matrices,
2. realize with ERA and move to continuous time,
3. take the normalized transfer function of the target output,
4. solve ``coeff(theta) = coeff_target`` for ``theta`` with multi-start
   Levenberg-Marquardt, deduplicate and sign-canonicalize the roots.

Mode ``m`` uses, for models with outputs ``(o1, o2)``: mode 1 ``o1`` only,
mode 2 ``o2`` only, mode 3 both traces for the realization and ``o1`` for the
equations, mode 4 both traces and ``o2``.
"""

import concurrent.futures as cf
import csv
import json
import logging
import os
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .algebra import structure_table
from .dynamics import _open_out, add_noise, simulate_traces
from .era import OrderPolicy, era_from_traces, to_continuous
from .errors import OpenQIDError, OrderMismatchError, ValidationError
from .generator import AffineLTI, accessible_set, assemble_generator, restrict
from .xfer import CANCEL_TOL, RationalTF, minimal_realization, normalize_tf, realization_tf, transfer_coeffs

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
WORKERS_ENV = "OPENQID_WORKERS"
NULL_RATIO = 1e-8
FAIL_PENALTY = 1e6


# ---------------------------------------------------------------------------
# fast model evaluation


class ModelEvaluator:
    """Restricted system and transfer function of a model as a function of theta.

    The accessible set is fixed from a random admissible parameter point.
    When ``A(theta)`` and ``b(theta)`` turn out to be affine in ``theta``
    (true for every built-in model) their coefficient matrices are cached
    and evaluation skips the structure-constant assembly.
    """

    def __init__(self, model, table=None, seed=12345):
        self.model = model
        self.table = table or structure_table(model.n_qubits)
        rng = np.random.default_rng(seed)
        self._probe = [model.sample_theta(rng) for _ in range(3)]
        full = assemble_generator(model, self._probe[0], self.table)
        self.indices = accessible_set(full)
        self._full_labels = full.state_labels
        base = self._assemble(self._probe[0])
        self.c = base.c
        self.x0 = base.x0
        self.state_labels = base.state_labels
        self.output_labels = base.output_labels
        self.affine = self._try_affine()

    def _assemble(self, theta):
        return restrict(assemble_generator(self.model, theta, self.table), self.indices)

    def _try_affine(self):
        n = len(self.model.theta_names)
        zero = self._assemble(np.zeros(n))
        cols_A, cols_b = [], []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            s = self._assemble(e)
            cols_A.append(s.A - zero.A)
            cols_b.append(s.b - zero.b)
        self._A0, self._b0 = zero.A, zero.b
        self._Ai = np.array(cols_A)
        self._bi = np.array(cols_b)
        for theta in self._probe[1:]:
            ref = self._assemble(theta)
            A, b = self._affine_eval(theta)
            scale = max(1.0, np.abs(ref.A).max())
            if np.abs(A - ref.A).max() > 1e-12 * scale or np.abs(b - ref.b).max() > 1e-12 * scale:
                return False
        return True

    def _affine_eval(self, theta):
        A = self._A0 + np.tensordot(theta, self._Ai, axes=1)
        b = self._b0 + theta @ self._bi
        return A, b

    def system(self, theta):
        """Restricted :class:`AffineLTI` in Pauli units."""
        theta = self.model.check_theta(theta)
        if not self.affine:
            return self._assemble(theta)
        A, b = self._affine_eval(theta)
        return AffineLTI(
            A=A,
            b=b,
            c=self.c,
            x0=self.x0,
            state_labels=self.state_labels,
            output_labels=self.output_labels,
            accessible_indices=tuple(self.indices),
            units="pauli",
        )

    def output_index(self, label):
        return self.model.output_index(label)

    def tf(self, theta, output, degree=None, cancel_tol=CANCEL_TOL):
        """Normalized transfer function; with ``degree`` it is padded by ``s^k/s^k`` if short."""
        s = self.system(theta)
        i = self.output_index(output) if isinstance(output, str) else int(output)
        A, b, c, x0 = minimal_realization(s.A, s.c[i], s.x0, s.b)
        tf = normalize_tf(transfer_coeffs(A, b, c, x0), cancel_tol=cancel_tol)
        if degree is not None and tf.den_degree != degree:
            if tf.den_degree > degree:
                tf = normalize_tf(tf, cancel_tol=cancel_tol, degree=degree)
            else:
                k = degree - tf.den_degree
                tf = RationalTF(
                    num=np.concatenate([np.zeros(k), tf.num]),
                    den=np.concatenate([np.zeros(k), tf.den]),
                    normalized=True,
                )
        return tf

    def joint_order(self, outputs, theta=None):
        """Minimal order of the system seen through several outputs."""
        theta = self._probe[1] if theta is None else theta
        s = self.system(theta)
        # the constant forcing is one more autonomous mode: augment with it
        K = s.order
        A = np.zeros((K + 1, K + 1))
        A[:K, :K] = s.A
        A[:K, K] = s.b
        rows = np.zeros((len(outputs), K + 1))
        for i, o in enumerate(outputs):
            rows[i, :K] = s.c[self.output_index(o)]
        Am, _, _, _ = minimal_realization(A, rows, np.append(s.x0, 1.0))
        return Am.shape[0]


# ---------------------------------------------------------------------------
# coefficient layout and residuals


@dataclass(frozen=True)
class CoefLayout:
    """Which normalized coefficients are free (parameter dependent) for one output."""

    den_degree: int
    num_len: int
    # (side, power, weight) for every non-constant coefficient, in selection order
    entries: tuple
    # d(entries)/d(theta) at a random parameter point, for rank-aware selection
    jacobian: np.ndarray | None = None

    def names(self, num_letter="q"):
        return [f"{num_letter if side == 'num' else 'p'}{k}" for side, k, _ in self.entries]


def coefficient_layout(evaluator, output, n_probe=2):
    """Generic degree structure of an output's transfer function.

    A coefficient is constant when it agrees across random parameter points;
    those (the monic leading term, ``c x0``) never enter a residual.
    Selection order is by total degree in theta (lowest first), numerator
    before denominator on ties.
    """
    model = evaluator.model
    rng = np.random.default_rng(777)
    tfs = [evaluator.tf(model.sample_theta(rng), output) for _ in range(n_probe)]
    d = max(t.den_degree for t in tfs)
    tfs = [evaluator.tf(model.sample_theta(rng), output, degree=d) for _ in range(n_probe)]
    num_len = max(t.num.size for t in tfs)
    nums = np.array([np.pad(t.num, (0, num_len - t.num.size)) for t in tfs])
    dens = np.array([t.den for t in tfs])
    entries = []
    for k in range(num_len):
        col = nums[:, k]
        if np.ptp(col) > 1e-12 * max(1.0, np.abs(col).max()) or (np.all(col == 0) and False):
            entries.append(("num", k, d - 1 - k))
    for k in range(d):
        col = dens[:, k]
        if np.ptp(col) > 1e-12 * max(1.0, np.abs(col).max()):
            entries.append(("den", k, d - k))
    side_rank = {"num": 0, "den": 1}
    entries.sort(key=lambda e: (e[2], side_rank[e[0]], -e[1]))
    layout = CoefLayout(den_degree=d, num_len=num_len, entries=tuple(entries))
    theta = model.sample_theta(rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        J = jacobian(lambda t: _coef_vector(evaluator.tf(t, output, degree=d), layout, entries), theta)
    return replace(layout, jacobian=J)


def _coef_vector(tf, layout, entries):
    num = np.zeros(max(layout.num_len, tf.num.size))
    num[: tf.num.size] = tf.num
    out = np.empty(len(entries))
    for i, (side, k, _) in enumerate(entries):
        out[i] = num[k] if side == "num" else (tf.den[k] if k < tf.den.size else 0.0)
    return out


def select_entries(layout, selection, n_unknowns):
    """Coefficients entering the residual: ``"all"`` or ``"lowest_degree_first"``."""
    if selection == "all":
        return layout.entries
    if selection == "lowest_degree_first":
        if len(layout.entries) < n_unknowns:
            raise ValidationError(
                f"only {len(layout.entries)} parameter-dependent coefficients for {n_unknowns} unknowns"
            )
        if layout.jacobian is None:
            return layout.entries[:n_unknowns]
        # walk the degree order, skipping equations that add no new information
        J = layout.jacobian
        J = J / np.maximum(np.abs(J).max(axis=1, keepdims=True), 1e-300)
        chosen, rank = [], 0
        for i in range(len(layout.entries)):
            r = np.linalg.matrix_rank(J[chosen + [i]], tol=1e-7 * np.sqrt(n_unknowns))
            if r > rank:
                chosen.append(i)
                rank = r
            if len(chosen) == n_unknowns:
                break
        # structurally unidentifiable: top up with the next simplest equations
        for i in range(len(layout.entries)):
            if len(chosen) == n_unknowns:
                break
            if i not in chosen:
                chosen.append(i)
        return tuple(layout.entries[i] for i in sorted(chosen))
    raise ValidationError(f"unknown residual selection {selection!r}")


def residual(model, theta, target, selection="lowest_degree_first", output=None, evaluator=None, layout=None):
    """Model-minus-target differences of the selected normalized coefficients.

    Parameters
    ----------
    model : ParamModel
    theta : array
    target : RationalTF
        Normalized target transfer function (typically from ERA).
    selection : str
        ``"lowest_degree_first"`` (as many equations as unknowns) or ``"all"``.
    output : str, optional
        Output label the target belongs to; defaults to the model's first output.
    """
    ev = evaluator or ModelEvaluator(model)
    output = output or model.output_labels[0]
    layout = layout or coefficient_layout(ev, output)
    if target.den_degree != layout.den_degree:
        raise OrderMismatchError(
            f"target has denominator degree {target.den_degree}, model output {output} has {layout.den_degree}; "
            "check the realization order"
        )
    entries = select_entries(layout, selection, len(model.theta_names))
    tf = ev.tf(theta, output, degree=layout.den_degree)
    return _coef_vector(tf, layout, entries) - _coef_vector(target, layout, entries)


# ---------------------------------------------------------------------------
# configuration and report


@dataclass
class EstimationConfig:
    """Settings for :func:`identify`.

    ``order_policy`` defaults to the model-informed order. ``start_box`` is a
    pair ``(lo, hi)`` of arrays; without it the box is
    ``[-2, 2] * max(|theta_nominal|, 1)``.
    """

    mode: int = 1
    order_policy: OrderPolicy = field(default_factory=OrderPolicy.model)
    n_starts: int = 64
    start_box: tuple | None = None
    residual_selection: str = "lowest_degree_first"
    seed: int = 0
    cancel_tol: float = CANCEL_TOL
    residual_tol: float = 1e-6
    dedup_tol: float = 1e-4
    max_nfev: int = 4000
    r: int | None = None
    s: int | None = None
    era_method: str = "auto"

    def __post_init__(self):
        if self.mode not in (1, 2, 3, 4):
            raise ValidationError(f"mode must be 1..4, got {self.mode}")
        if self.n_starts < 0:
            raise ValidationError("n_starts must be non-negative")

    def to_dict(self):
        d = asdict(self)
        d["order_policy"] = self.order_policy.to_dict()
        if self.start_box is not None:
            d["start_box"] = [np.asarray(b).tolist() for b in self.start_box]
        return d


def mode_wiring(model, mode):
    """``(hankel_outputs, target_output)`` for an estimation mode."""
    outs = model.output_labels
    if mode in (2, 4) and len(outs) < 2:
        raise ValidationError(f"mode {mode} needs a second output; {model.name} has {outs}")
    if mode in (3, 4) and len(outs) < 2:
        raise ValidationError(f"mode {mode} needs two outputs; {model.name} has {outs}")
    if mode == 1:
        return (outs[0],), outs[0]
    if mode == 2:
        return (outs[1],), outs[1]
    if mode == 3:
        return tuple(outs), outs[0]
    return tuple(outs), outs[1]


@dataclass
class Solution:
    theta: np.ndarray
    residual_norm: float
    sign_class: str
    rel_errors: np.ndarray | None = None
    n_hits: int = 1

    def to_dict(self, names):
        d = {
            "theta": dict(zip(names, map(float, self.theta))),
            "residual_norm": float(self.residual_norm),
            "sign_class": self.sign_class,
            "n_hits": self.n_hits,
        }
        if self.rel_errors is not None:
            d["rel_errors_pct"] = {n: (None if np.isnan(e) else float(e)) for n, e in zip(names, self.rel_errors)}
        return d


@dataclass
class EstimateReport:
    """Outcome of :func:`identify`; ``solutions`` sorted by residual norm."""

    model: str
    theta_names: tuple
    mode: int
    status: str
    solutions: list
    target_tf: RationalTF | None = None
    coefficient_names: tuple = ()
    realization_order: int | None = None
    singular_values: np.ndarray | None = None
    identifiability_notes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def best(self):
        return self.solutions[0] if self.solutions else None

    def to_dict(self):
        sv = None if self.singular_values is None else [float(v) for v in self.singular_values[:20]]
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "theta_names": list(self.theta_names),
            "mode": self.mode,
            "status": self.status,
            "solutions": [s.to_dict(self.theta_names) for s in self.solutions],
            "target_tf": None if self.target_tf is None else self.target_tf.to_dict(),
            "coefficients_matched": list(self.coefficient_names),
            "realization_order": self.realization_order,
            "leading_singular_values": sv,
            "identifiability_notes": self.identifiability_notes,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


# ---------------------------------------------------------------------------
# errors and canonical forms


def relative_errors(theta_hat, theta_nominal, sign_ambiguous=None):
    """Percentage errors ``|theta_hat - theta| / |theta| * 100``.

    ``sign_ambiguous`` is a boolean mask; those entries compare absolute
    values. A zero nominal entry yields NaN for that index.
    """
    th = np.asarray(theta_hat, dtype=float)
    t0 = np.asarray(theta_nominal, dtype=float)
    if th.shape != t0.shape:
        raise ValidationError(f"shape mismatch {th.shape} vs {t0.shape}")
    if sign_ambiguous is not None:
        mask = np.asarray(sign_ambiguous, dtype=bool)
        th = np.where(mask, np.abs(th), th)
        t0 = np.where(mask, np.abs(t0), t0)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.abs(th - t0) / np.abs(t0) * 100.0
    return np.where(t0 == 0, np.nan, e)


def _sign_mask(model):
    return np.array([n in model.sign_ambiguous for n in model.theta_names])


def _canon(model, theta):
    return model.canonicalize(theta) if model.canonicalize else np.asarray(theta, dtype=float)


def _sign_class(model):
    amb = [n for n in model.theta_names if n in model.sign_ambiguous]
    if amb:
        return "sign of " + ", ".join(amb) + " indeterminate"
    return "unique" if model.canonicalize else "not canonicalized"


def default_start_box(theta_nominal):
    scale = np.maximum(np.abs(np.asarray(theta_nominal, dtype=float)), 1.0)
    return -2.0 * scale, 2.0 * scale


def _same(a, b, tol):
    ref = np.abs(b) + 1e-3 * np.abs(b).max()
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(ref, 1e-12)))


def jacobian(fun, theta, rel_step=1e-5):
    """Central-difference Jacobian."""
    theta = np.asarray(theta, dtype=float)
    floor = 1e-2 * max(np.abs(theta).max(), 1e-8)
    h = rel_step * np.maximum(np.abs(theta), floor)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h[i]
        cols.append((fun(theta + e) - fun(theta - e)) / (2 * h[i]))
    return np.column_stack(cols)


def identifiability_notes(fun, theta, names, ratio=NULL_RATIO):
    """Directions in parameter space the coefficients do not resolve."""
    J = jacobian(fun, theta)
    U, sv, Vt = np.linalg.svd(J, full_matrices=True)
    sv_full = np.zeros(len(names))
    sv_full[: sv.size] = sv
    smax = sv_full.max() if sv_full.size else 0.0
    notes = []
    for k in range(len(names)):
        if smax == 0 or sv_full[k] < ratio * smax:
            v = Vt[k]
            v = v * np.sign(v[np.argmax(np.abs(v))])
            terms = [f"{c:+.3f}*{n}" for c, n in zip(v, names) if abs(c) > 1e-6]
            notes.append(
                {
                    "direction": dict(zip(names, map(float, v))),
                    "singular_value_ratio": float(sv_full[k] / smax) if smax else 0.0,
                    "summary": "unresolved combination " + " ".join(terms),
                }
            )
    return notes, sv_full


# ---------------------------------------------------------------------------
# identification


def realize_for_mode(model, traces, config):
    """ERA realization (continuous time) of the traces selected by ``config.mode``."""
    hankel_outputs, _ = mode_wiring(model, config.mode)
    ev = None
    policy = config.order_policy
    if policy.kind == "model" and policy.value is None:
        ev = ModelEvaluator(model)
        policy = OrderPolicy.model(ev.joint_order(hankel_outputs))
    sel = traces.select(list(hankel_outputs))
    real = era_from_traces(sel, r=config.r, s=config.s, order_policy=policy, method=config.era_method)
    return to_continuous(real), ev


def identify(model, traces, config=None, theta_ref=None, realization=None, evaluator=None):
    """Estimate ``theta`` from measured traces.

    Parameters
    ----------
    model : ParamModel
    traces : TraceSet
        Must contain the outputs required by ``config.mode``.
    config : EstimationConfig
    theta_ref : array, optional
        Reference parameters for relative errors; defaults to the model nominal.
    realization : Realization, optional
        Precomputed continuous realization for the mode's traces (reused by
        the noise sweep across modes sharing a Hankel matrix).

    Returns
    -------
    EstimateReport
        ``status`` is ``"ok"`` or ``"no_solution"``.
    """
    config = config or EstimationConfig()
    t_start = time.perf_counter()
    hankel_outputs, target_out = mode_wiring(model, config.mode)
    ev = evaluator
    if realization is None:
        realization, ev2 = realize_for_mode(model, traces, config)
        ev = ev or ev2
    ev = ev or ModelEvaluator(model)
    layout = coefficient_layout(ev, target_out)
    n = len(model.theta_names)
    entries = select_entries(layout, config.residual_selection, n)
    target = realization_tf(
        realization, output=list(hankel_outputs).index(target_out), cancel_tol=config.cancel_tol,
        degree=layout.den_degree if realization.order >= layout.den_degree else None,
    )
    if target.den_degree != layout.den_degree:
        raise OrderMismatchError(
            f"realization of order {realization.order} gives a degree-{target.den_degree} transfer function; "
            f"{model.name} output {target_out} needs {layout.den_degree}"
        )
    t_vec = _coef_vector(target, layout, entries)
    all_entries = layout.entries
    t_all = _coef_vector(target, layout, all_entries)

    def fun(theta):
        try:
            tf = ev.tf(theta, target_out, degree=layout.den_degree)
        except (OpenQIDError, np.linalg.LinAlgError, ValueError):
            return np.full(len(entries), FAIL_PENALTY)
        r = _coef_vector(tf, layout, entries) - t_vec
        return np.where(np.isfinite(r), r, FAIL_PENALTY)

    def fun_all(theta):
        tf = ev.tf(theta, target_out, degree=layout.den_degree)
        return _coef_vector(tf, layout, all_entries) - t_all

    ref = model.theta_nominal if theta_ref is None else np.asarray(theta_ref, dtype=float)
    if config.start_box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in config.start_box)
    elif ref is not None:
        lo, hi = default_start_box(ref)
    else:
        raise ValidationError("start_box is required when no nominal parameters are known")
    rng = np.random.default_rng(config.seed)
    starts = [0.5 * (lo + hi)] + [rng.uniform(lo, hi) for _ in range(config.n_starts)]

    tol = config.residual_tol * max(np.linalg.norm(t_vec), 1e-12)
    found = []
    n_conv = 0
    for x0 in starts:
        r0 = np.linalg.norm(fun(x0))
        try:
            sol = least_squares(fun, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=config.max_nfev)
        except (ValueError, np.linalg.LinAlgError):
            continue
        x, rn = sol.x, np.linalg.norm(sol.fun)
        if rn > r0:  # never report worse than the start
            x, rn = x0, r0
        if not np.all(np.isfinite(x)) or rn > tol:
            continue
        n_conv += 1
        x = _canon(model, x)
        for s in found:
            if _same(x, s.theta, config.dedup_tol):
                s.n_hits += 1
                if rn < s.residual_norm:
                    s.theta, s.residual_norm = x, rn
                break
        else:
            found.append(Solution(theta=x, residual_norm=rn, sign_class=_sign_class(model)))
    found.sort(key=lambda s: s.residual_norm)

    mask = _sign_mask(model)
    if ref is not None:
        for s in found:
            s.rel_errors = relative_errors(s.theta, _canon(model, ref), mask)

    notes = []
    if found:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            notes, _ = identifiability_notes(fun_all, found[0].theta, model.theta_names)
    status = "ok" if found else "no_solution"
    best_res = min((np.linalg.norm(fun(x)) for x in starts[:1]), default=np.nan)
    return EstimateReport(
        model=model.name,
        theta_names=model.theta_names,
        mode=config.mode,
        status=status,
        solutions=found,
        target_tf=target,
        coefficient_names=tuple(
            f"{'q' if side == 'num' else 'p'}{k}" for side, k, _ in entries
        ),
        realization_order=realization.order,
        singular_values=realization.singular_values,
        identifiability_notes=notes,
        diagnostics={
            "n_starts": len(starts),
            "n_converged": n_conv,
            "residual_tol": tol,
            "center_start_residual": float(best_res),
            "runtime_s": time.perf_counter() - t_start,
            "hankel_outputs": list(hankel_outputs),
            "target_output": target_out,
        },
        config=config.to_dict(),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo noise study


@dataclass
class SweepRow:
    mode: int
    sigma: float
    param: str
    mean_rel_err_pct: float
    stderr_pct: float
    n_failed: int


@dataclass
class SweepResult:
    rows: list
    per_instance: dict  # (mode, sigma) -> array (M, n_params), NaN rows for failures

    def to_csv(self, path):
        with _open_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode", "sigma", "param", "mean_rel_err_pct", "stderr_pct", "n_failed"])
            for r in self.rows:
                w.writerow([r.mode, r.sigma, r.param, repr(r.mean_rel_err_pct), repr(r.stderr_pct), r.n_failed])

    def mean(self, mode, sigma, param):
        for r in self.rows:
            if r.mode == mode and r.sigma == sigma and r.param == param:
                return r.mean_rel_err_pct
        raise KeyError((mode, sigma, param))


def _model_ref(model):
    src = model.meta.get("source")
    if src == "json":
        return ("json", model.meta.get("doc"))
    return ("builtin", model.name)


def _rebuild(ref):
    from .generator import model_from_dict
    from .models import builtin_model

    kind, val = ref
    return model_from_dict(val) if kind == "json" else builtin_model(val)


def _instance_seed(seed, sigma_index, instance):
    return np.random.SeedSequence([int(seed), int(sigma_index), int(instance)])


def _run_instance(task):
    """One noise realization shared by all requested modes."""
    model_ref, clean, sigma, seq, theta_nom, modes, cfg = task
    model = _rebuild(model_ref) if isinstance(model_ref, tuple) else model_ref
    noisy = add_noise(clean, sigma, rng=np.random.default_rng(seq))
    out = {}
    cache = {}
    ev = _evaluator_for(model)
    mask = _sign_mask(model)
    for mode in modes:
        c = replace(cfg, mode=mode)
        hankel_outputs, _ = mode_wiring(model, mode)
        try:
            if hankel_outputs not in cache:
                cache[hankel_outputs], _ = realize_for_mode(model, noisy, c)
            rep = identify(model, noisy, c, theta_ref=theta_nom, realization=cache[hankel_outputs], evaluator=ev)
        except OpenQIDError as exc:
            log.debug("instance failed in mode %s: %s", mode, exc)
            out[mode] = None
            continue
        if rep.status != "ok":
            out[mode] = None
            continue
        errs = [relative_errors(s.theta, _canon(model, theta_nom), mask) for s in rep.solutions]
        out[mode] = min(errs, key=lambda e: np.nansum(e))
    return out


_EV_CACHE = {}


def _evaluator_for(model):
    key = id(model)
    if key not in _EV_CACHE:
        _EV_CACHE.clear()
        _EV_CACHE[key] = (model, ModelEvaluator(model))
    return _EV_CACHE[key][1]


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer") from None


def noise_sweep(
    model,
    theta_nominal,
    sigma_list,
    M,
    config=None,
    seed=0,
    dt=0.01,
    tf=120.0,
    modes=(3, 4),
    workers=None,
):
    """Mean relative errors over ``M`` noise instances per noise level.

    For each ``sigma`` and instance, one noisy copy of the traces is drawn
    from a stream derived from ``(seed, sigma index, instance)``; every mode
    in ``modes`` is estimated from that same copy. Per instance the solution
    with the least summed error is kept. Failed instances are counted and
    excluded.
    """
    if M < 1:
        raise ValidationError("M must be at least 1")
    config = config or EstimationConfig()
    theta_nominal = np.asarray(theta_nominal, dtype=float)
    ev = _evaluator_for(model)
    n_steps = int(round(tf / dt))
    clean = simulate_traces(ev.system(theta_nominal), dt, n_steps)
    if config.order_policy.kind == "model" and config.order_policy.value is None:
        # one fixed order per Hankel wiring is resolved inside realize_for_mode
        pass
    n_workers = worker_count(workers)
    model_ref = _model_ref(model) if n_workers > 1 else model
    tasks = []
    for si, sigma in enumerate(sigma_list):
        for m in range(M):
            tasks.append(
                ((si, m), (model_ref, clean, float(sigma), _instance_seed(seed, si, m), theta_nominal, tuple(modes), config))
            )
    results = {}
    if n_workers > 1:
        with cf.ProcessPoolExecutor(max_workers=n_workers) as pool:
            futs = {pool.submit(_run_instance, t): key for key, t in tasks}
            for fut in cf.as_completed(futs):
                results[futs[fut]] = fut.result()
    else:
        for key, t in tasks:
            results[key] = _run_instance(t)

    rows = []
    per_instance = {}
    names = model.theta_names
    for si, sigma in enumerate(sigma_list):
        for mode in modes:
            arr = np.full((M, len(names)), np.nan)
            failed = 0
            for m in range(M):
                e = results[(si, m)].get(mode)
                if e is None:
                    failed += 1
                else:
                    arr[m] = e
            per_instance[(mode, float(sigma))] = arr
            ok = arr[~np.all(np.isnan(arr), axis=1)]
            if failed:
                log.warning("mode %d sigma %g: %d of %d instances gave no solution", mode, sigma, failed, M)
            for j, name in enumerate(names):
                col = ok[:, j] if ok.size else np.zeros(0)
                mean = float(np.mean(col)) if col.size else float("nan")
                se = float(np.std(col, ddof=1) / np.sqrt(col.size)) if col.size > 1 else float("nan")
                rows.append(SweepRow(mode, float(sigma), name, mean, se, failed))
    return SweepResult(rows=rows, per_instance=per_instance)
