"""Pure numpy implementations of the hot loops.

These are the reference versions; ``_ckernels`` must agree with them to
rounding error.
"""

import numpy as np

_CHUNK = 1 << 22  # elements per temporary (E x t) block


def fourier_sum(E, w, t):
    """Return ``sum_n w[n] * exp(-1j * E[n] * t[j])`` for every ``t[j]``."""
    E = np.asarray(E, dtype=float)
    w = np.asarray(w, dtype=complex)
    t = np.asarray(t, dtype=float)
    out = np.empty(t.size, dtype=complex)
    rows = max(1, _CHUNK // max(E.size, 1))
    for start in range(0, t.size, rows):
        tt = t[start:start + rows]
        out[start:start + rows] = np.exp(-1j * np.outer(tt, E)) @ w
    return out


def causal_convolution(c, a):
    """Discrete causal convolution ``out[n] = sum_{k<=n} c[k] a[n-k]``."""
    c = np.asarray(c, dtype=complex)
    a = np.asarray(a, dtype=complex)
    N = a.size
    if c.size < N:
        raise ValueError("weights shorter than signal")
    out = np.empty(N, dtype=complex)
    for n in range(N):
        out[n] = np.dot(c[n::-1], a[:n + 1])
    return out


def hilbert_sum(x, E, wd, w, dx, rtol):
    """Subtracted principal-value sums.

    ``S[j] = sum_m (wd[m] - w[m] * dx[j]) / (x[j] - E[m])`` over nodes not
    coinciding with ``x[j]``; the weight of the skipped nodes is returned
    separately so the caller can add the derivative term.
    """
    x = np.asarray(x, dtype=float)
    E = np.asarray(E, dtype=float)
    wd = np.asarray(wd, dtype=float)
    w = np.asarray(w, dtype=float)
    dx = np.asarray(dx, dtype=float)
    S = np.empty(x.size)
    wc = np.empty(x.size)
    rows = max(1, _CHUNK // max(E.size, 1))
    for start in range(0, x.size, rows):
        xx = x[start:start + rows, None]
        diff = xx - E[None, :]
        close = np.abs(diff) <= rtol * (1.0 + np.abs(xx))
        num = wd[None, :] - w[None, :] * dx[start:start + rows, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(close, 0.0, num / np.where(close, 1.0, diff))
        S[start:start + rows] = terms.sum(axis=1)
        wc[start:start + rows] = np.where(close, w[None, :], 0.0).sum(axis=1)
    return S, wc
