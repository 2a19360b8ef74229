"""Compiled vs pure-numpy kernels: timings and agreement.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each kernel is run on both backends with the same inputs; the table gives
the best wall time of ``--repeat`` runs, the speedup and the largest
relative difference.  The last row times a full single-window survival curve
through ``SpectralFunction.transform``.
"""

import argparse
import time

import numpy as np

from decaylab import kernels
from decaylab.lee import LeeModel, lee_spectral_function
from decaylab.numerics import DEFAULT_CONFIG


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def rel_diff(a, b):
    a, b = (np.concatenate([np.ravel(x) for x in v]) if isinstance(v, tuple) else np.ravel(v) for v in (a, b))
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def cases(scale):
    rng = np.random.default_rng(0)
    nE, nt = int(20000 * scale), int(2000 * scale)
    # uniform nodes and times: the case the compiled recurrence is built for
    E = np.linspace(0.0, 5.0, nE)
    w = rng.standard_normal(nE) + 1j * rng.standard_normal(nE)
    t = np.linspace(0.0, 25.0, nt)
    yield "fourier_sum uniform", lambda b: kernels.fourier_sum(E, w, t, backend=b)
    Er = np.sort(rng.uniform(0.0, 5.0, nE))
    yield "fourier_sum scattered", lambda b: kernels.fourier_sum(Er, w, t, backend=b)
    n = int(4000 * scale)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    yield "causal_convolution", lambda b: kernels.causal_convolution(c, a, backend=b)
    x = np.linspace(0.01, 4.99, int(2000 * scale))
    wd = rng.standard_normal(nE)
    wr = np.abs(rng.standard_normal(nE))
    dx = rng.standard_normal(x.size)
    yield "hilbert_sum", lambda b: kernels.hilbert_sum(x, Er, wd, wr, dx, backend=b)
    sp = lee_spectral_function(LeeModel.window())
    tt = np.linspace(0.0, 25.0, int(5000 * scale))
    yield "window survival curve", lambda b: sp.transform(tt, DEFAULT_CONFIG, backend=b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="a tenth of the default sizes")
    args = ap.parse_args(argv)
    try:
        kernels._select("cython")
    except ImportError:
        print("compiled extension not built; run: python3 setup.py build_ext --inplace")
        return 1
    print(f"threads: {kernels.thread_count()}  default backend: {kernels.BACKEND}")
    print(f"{'kernel':24s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in cases(0.1 if args.quick else 1.0):
        tp, rp = best_time(lambda: fn("python"), args.repeat)
        tc, rc = best_time(lambda: fn("cython"), args.repeat)
        print(f"{name:24s} {tp:11.4f} {tc:11.4f} {tp / tc:8.2f} {rel_diff(rc, rp):13.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
