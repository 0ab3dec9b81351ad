"""Time the numba kernels against their numpy counterparts.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both backends
are imported in the same process, so the comparison ignores the
``OPENQID_DISABLE_NUMBA`` flag. Results are also checked for agreement.
"""

import argparse
import time

import numpy as np

from openqid import _kernels
from openqid.dynamics import _superoperator, discretize
from openqid.estimate import ModelEvaluator
from openqid.generator import product_state
from openqid.models import builtin_model


def _cases():
    model = builtin_model("energy_transfer")
    lti = ModelEvaluator(model).system(model.theta_nominal)
    Ad, bd = discretize(lti.A, lti.b, 0.01)
    rng = np.random.default_rng(0)

    H = model.hamiltonian(model.theta_nominal)
    L = _superoperator(H, model.jumps(model.theta_nominal))
    rho0 = product_state("0+").reshape(-1).astype(complex)
    obs = np.array([np.eye(4).reshape(-1)], dtype=complex)

    y = rng.standard_normal((2, 6001))
    rows = np.arange(1500)
    cols = np.arange(1500)
    A = rng.standard_normal((12, 12))
    return {
        "affine_steps (6x6, 12000 steps)": ("affine_steps", (Ad, bd, lti.x0, lti.c, 12000)),
        "rk4_linear (16x16, 6000x20 steps)": ("rk4_linear", (L, rho0, 0.0005, 6000, 20, obs)),
        "hankel (3000x1500)": ("hankel", (y, rows, cols, 0)),
        "faddeev_leverrier (12x12)": ("faddeev_leverrier", (A,)),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not installed")

    print(f"{'kernel':36s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}  max|diff|")
    for label, (name, fargs) in _cases().items():
        nb = getattr(_kernels.numba_impl, name)
        npf = getattr(_kernels.numpy_impl, name)
        nb(*fargs)  # compile
        t_np, r_np = _time(npf, fargs, args.repeat)
        t_nb, r_nb = _time(nb, fargs, args.repeat)
        r_np = r_np if isinstance(r_np, tuple) else (r_np,)
        r_nb = r_nb if isinstance(r_nb, tuple) else (r_nb,)
        diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(r_np, r_nb))
        print(f"{label:36s} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} {t_np / t_nb:8.2f}  {diff:.2e}")


if __name__ == "__main__":
    main()
