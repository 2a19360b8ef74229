"""Backend selection for the hot loops.

The compiled extension ``decaylab._ckernels`` is used when it imports;
otherwise, or when ``DECAYLAB_PURE_PYTHON=1`` is set, the numpy versions
in ``decaylab._pykernels`` are used.  ``DECAYLAB_THREADS`` caps the number
of worker threads used to split large Fourier sums.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

if os.environ.get("DECAYLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels
        BACKEND = "python"

_MIN_WORK_PER_THREAD = 2_000_000


def thread_count():
    env = os.environ.get("DECAYLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def fourier_sum(E, w, t, backend=None):
    """``sum_n w[n] exp(-i E[n] t[j])`` for an array of times.

    Work is split over contiguous blocks of ``t`` so the uniform-grid
    recurrence in the compiled kernel still applies within each block.
    """
    impl = _select(backend)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    E = np.asarray(E, dtype=float)
    nthreads = min(thread_count(), max(1, E.size * t.size // _MIN_WORK_PER_THREAD))
    if nthreads <= 1 or t.size < 2 * nthreads:
        return impl.fourier_sum(E, w, t)
    blocks = np.array_split(t, nthreads)
    with ThreadPoolExecutor(nthreads) as pool:
        parts = list(pool.map(lambda tb: impl.fourier_sum(E, w, tb), blocks))
    return np.concatenate(parts)


def causal_convolution(c, a, backend=None):
    """``out[n] = sum_{k<=n} c[k] a[n-k]``."""
    return _select(backend).causal_convolution(c, a)


def hilbert_sum(x, E, wd, w, dx, rtol=1e-13, backend=None):
    return _select(backend).hilbert_sum(x, E, wd, w, dx, float(rtol))


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
