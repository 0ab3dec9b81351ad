"""Command-line front end.

Subcommands: ``simulate``, ``identify``, ``sweep-noise``, ``verify-formulas``
and ``models list``. Settings can come from a JSON config file
(``--config``); explicit flags override file values, and the effective
settings are echoed into every JSON report.

Exit codes: 0 success, 1 failed formula verification, 2 invalid input,
3 no solution found.
"""

import argparse
import json
import logging
import sys
import warnings

from . import __version__
from .dynamics import TraceSet, add_noise, check_sampling, simulate_traces
from .era import OrderPolicy, dump_singular_values
from .errors import OpenQIDError, ValidationError
from .estimate import EstimationConfig, ModelEvaluator, identify, noise_sweep, realize_for_mode
from .generator import load_model_json, model_from_dict
from .models import builtin_model, describe_models

log = logging.getLogger("openqid")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_NO_SOLUTION = 3

DEFAULTS = {
    "model": "energy_transfer",
    "model_json": None,
    "theta": "nominal",
    "dt": 0.01,
    "tf": 60.0,
    "sigma": 0.0,
    "seed": 0,
    "mode": 1,
    "order": "model",
    "n_starts": 64,
    "selection": "lowest_degree_first",
    "sigmas": "0,0.05,0.10,0.15",
    "M": 50,
    "modes": "3,4",
    "workers": None,
    "out": None,
    "traces": None,
    "dump_sv": None,
}

# ---------------------------------------------------------------------------
# config handling


def load_config(path):
    """Read a flat JSON object of settings; errors carry the line number."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}:1: config must be a JSON object")
    lines = text.splitlines()
    out = {}
    for key, val in doc.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            lineno = next((i + 1 for i, ln in enumerate(lines) if f'"{key}"' in ln), 1)
            raise ValidationError(f"{path}:{lineno}: unknown setting {key!r}")
        out[k] = val
    return out


def effective_settings(args, **overrides):
    """Defaults (with per-command ``overrides``), then config file, then flags."""
    eff = dict(DEFAULTS, **overrides)
    if getattr(args, "config", None):
        eff.update(load_config(args.config))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            eff[k] = v
    _validate(eff)
    return eff


def _validate(eff):
    if not float(eff["dt"]) > 0:
        raise ValidationError(f"dt must be positive, got {eff['dt']}")
    if float(eff["tf"]) < float(eff["dt"]):
        raise ValidationError(f"tf ({eff['tf']}) must be at least dt ({eff['dt']})")
    if int(eff["mode"]) not in (1, 2, 3, 4):
        raise ValidationError(f"mode must be 1..4, got {eff['mode']}")
    if float(eff["sigma"]) < 0:
        raise ValidationError("sigma must be non-negative")


def _model(eff):
    if eff.get("model_json"):
        src = eff["model_json"]
        return model_from_dict(src) if isinstance(src, dict) else load_model_json(src)
    return builtin_model(eff["model"])


def _theta(model, spec):
    if isinstance(spec, (list, tuple)):
        return model.check_theta(spec)
    if spec in (None, "nominal"):
        if model.theta_nominal is None:
            raise ValidationError(f"model {model.name} has no nominal parameters; pass --theta")
        return model.theta_nominal.copy()
    if spec == "unknown":
        return None
    try:
        vals = [float(v) for v in str(spec).split(",")]
    except ValueError:
        raise ValidationError(f"cannot parse theta {spec!r}") from None
    return model.check_theta(vals)


def _order_policy(spec):
    s = str(spec)
    if s == "model":
        return OrderPolicy.model()
    if s == "threshold":
        return OrderPolicy.threshold()
    if s.startswith("threshold:"):
        return OrderPolicy.threshold(float(s.split(":", 1)[1]))
    try:
        return OrderPolicy.fixed(int(s))
    except ValueError:
        raise ValidationError(f"order must be 'model', 'threshold[:rel]' or an integer, got {spec!r}") from None


def _floats(spec, name):
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    try:
        return [float(v) for v in str(spec).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse {name} {spec!r}") from None


def _simulate(model, theta, eff):
    ev = ModelEvaluator(model)
    lti = ev.system(theta)
    dt = float(eff["dt"])
    check_sampling(lti.A, dt)
    n_steps = int(round(float(eff["tf"]) / dt))
    tr = simulate_traces(lti, dt, n_steps)
    if float(eff["sigma"]) > 0:
        tr = add_noise(tr, float(eff["sigma"]), seed=int(eff["seed"]))
    return tr, ev


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    eff = effective_settings(args)
    model = _model(eff)
    theta = _theta(model, eff["theta"])
    if theta is None:
        raise ValidationError("simulate needs concrete parameters")
    tr, _ = _simulate(model, theta, eff)
    tr.to_csv(sys.stdout if eff["out"] in (None, "-") else eff["out"])
    return EXIT_OK


def cmd_identify(args):
    eff = effective_settings(args)
    model = _model(eff)
    theta = _theta(model, eff["theta"])
    ev = None
    if eff["traces"]:
        traces = TraceSet.from_csv(eff["traces"])
    else:
        if theta is None:
            raise ValidationError("identify without --traces simulates data and needs --theta")
        traces, ev = _simulate(model, theta, eff)
    cfg = EstimationConfig(
        mode=int(eff["mode"]),
        order_policy=_order_policy(eff["order"]),
        n_starts=int(eff["n_starts"]),
        residual_selection=eff["selection"],
        seed=int(eff["seed"]),
    )
    real, ev2 = realize_for_mode(model, traces, cfg)
    if eff["dump_sv"]:
        dump_singular_values(real, eff["dump_sv"])
    rep = identify(model, traces, cfg, theta_ref=theta, realization=real, evaluator=ev or ev2)
    rep.config = {"effective": dict(eff), "estimation": cfg.to_dict()}
    _write(rep.to_json() + "\n", eff["out"])
    if rep.status != "ok":
        log.error("no parameter set reproduces the measured transfer function")
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_sweep(args):
    eff = effective_settings(args, tf=120.0)
    model = _model(eff)
    theta = _theta(model, eff["theta"])
    if theta is None:
        raise ValidationError("sweep-noise needs concrete parameters")
    cfg = EstimationConfig(
        order_policy=_order_policy(eff["order"]),
        n_starts=int(eff["n_starts"]),
        residual_selection=eff["selection"],
        seed=int(eff["seed"]),
    )
    modes = [int(m) for m in _floats(eff["modes"], "modes")]
    res = noise_sweep(
        model,
        theta,
        _floats(eff["sigmas"], "sigmas"),
        int(eff["M"]),
        cfg,
        seed=int(eff["seed"]),
        dt=float(eff["dt"]),
        tf=float(eff["tf"]),
        modes=modes,
        workers=eff["workers"],
    )
    res.to_csv(sys.stdout if eff["out"] in (None, "-") else eff["out"])
    return EXIT_OK


def cmd_verify(args):
    from .xfer import verify_formulas

    tol = args.tol
    ok = True
    for model_id, output, worst in verify_formulas(args.n, args.seed):
        good = worst <= tol
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {model_id} {output}: max relative deviation {worst:.3e} (tol {tol:g})")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_models(args):
    for mid, names, convention in describe_models():
        print(f"{mid}")
        print(f"    parameters: {', '.join(names)}")
        print(f"    convention: {convention}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, sim=True):
    p.add_argument("--config", help="JSON file of settings (flags take precedence)")
    p.add_argument("--model", help="built-in model id, e.g. energy_transfer or dephasing_chain(3)")
    p.add_argument("--model-json", dest="model_json", help="model definition file (JSON)")
    p.add_argument("--theta", help="comma-separated parameters, 'nominal' or 'unknown'")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "-o", help="output file ('-' for stdout)")
    if sim:
        p.add_argument("--dt", type=float, help="sampling period")
        p.add_argument("--tf", type=float, help="final time")
        p.add_argument("--sigma", type=float, help="Gaussian noise level")


def build_parser():
    parser = argparse.ArgumentParser(prog="openqid", description="Parameter estimation for open quantum systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write noiseless or noisy output traces as CSV")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="estimate parameters from traces; writes a JSON report")
    _common(p)
    p.add_argument("--traces", help="trace CSV (simulated inline when absent)")
    p.add_argument("--mode", type=int, help="estimation mode 1..4")
    p.add_argument("--order", help="'model', 'threshold[:rel]' or an integer order")
    p.add_argument("--n-starts", dest="n_starts", type=int)
    p.add_argument("--selection", choices=["lowest_degree_first", "all"])
    p.add_argument("--dump-sv", dest="dump_sv", help="write Hankel singular values to this CSV")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("sweep-noise", help="Monte-Carlo relative errors versus noise level")
    _common(p)
    p.add_argument("--sigmas", help="comma-separated noise levels")
    p.add_argument("--M", type=int, help="instances per noise level")
    p.add_argument("--modes", help="comma-separated estimation modes (default 3,4)")
    p.add_argument("--order", help="'model', 'threshold[:rel]' or an integer order")
    p.add_argument("--n-starts", dest="n_starts", type=int)
    p.add_argument("--selection", choices=["lowest_degree_first", "all"])
    p.add_argument("--workers", type=int, help="process count (default from OPENQID_WORKERS, else 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-formulas", help="check numeric transfer functions against closed forms")
    p.add_argument("--n", type=int, default=100, help="random parameter points per model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("models", help="model registry")
    msub = p.add_subparsers(dest="models_command", required=True)
    q = msub.add_parser("list", help="print ids, parameters and conventions")
    q.set_defaults(func=cmd_models)
    return parser


def run(argv=None):
    """Parse ``argv`` and dispatch; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OpenQIDError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())
