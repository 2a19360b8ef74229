# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics match ``decaylab._pykernels`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, fabs

cnp.import_array()

# re-sync interval for the phase recurrence
cdef int RESYNC = 64


cdef void _fourier_direct(const double[::1] E, const double complex[::1] w,
                          const double[::1] t, double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t j, n
    cdef double ph, re, im
    for j in range(t.shape[0]):
        re = 0.0
        im = 0.0
        for n in range(E.shape[0]):
            ph = E[n] * t[j]
            # w * (cos ph - i sin ph)
            re += w[n].real * cos(ph) + w[n].imag * sin(ph)
            im += w[n].imag * cos(ph) - w[n].real * sin(ph)
        out[j] = re + 1j * im


cdef void _fourier_uniform(const double[::1] E, const double complex[::1] w,
                           double t0, double dt, Py_ssize_t nt,
                           double[::1] acc_re, double[::1] acc_im) noexcept nogil:
    # four nodes per pass so the phase recurrences run independently
    cdef Py_ssize_t j, n, k, j0, j1, nE = E.shape[0]
    cdef double zr[4]
    cdef double zi[4]
    cdef double rr[4]
    cdef double ri[4]
    cdef double wr[4]
    cdef double wi[4]
    cdef double ph, tmp, sr, si
    for n in range(0, nE, 4):
        for k in range(4):
            if n + k < nE:
                wr[k] = w[n + k].real
                wi[k] = w[n + k].imag
                rr[k] = cos(E[n + k] * dt)
                ri[k] = -sin(E[n + k] * dt)
            else:
                wr[k] = 0.0
                wi[k] = 0.0
                rr[k] = 1.0
                ri[k] = 0.0
        j0 = 0
        while j0 < nt:
            j1 = j0 + RESYNC
            if j1 > nt:
                j1 = nt
            for k in range(4):
                if n + k < nE:
                    ph = E[n + k] * (t0 + j0 * dt)
                else:
                    ph = 0.0
                # fold the weight into the phasor
                zr[k] = wr[k] * cos(ph) + wi[k] * sin(ph)
                zi[k] = wi[k] * cos(ph) - wr[k] * sin(ph)
            for j in range(j0, j1):
                sr = 0.0
                si = 0.0
                for k in range(4):
                    sr = sr + zr[k]
                    si = si + zi[k]
                    tmp = zr[k] * rr[k] - zi[k] * ri[k]
                    zi[k] = zr[k] * ri[k] + zi[k] * rr[k]
                    zr[k] = tmp
                acc_re[j] += sr
                acc_im[j] += si
            j0 = j1


def fourier_sum(E, w, t):
    """Return ``sum_n w[n] * exp(-1j * E[n] * t[j])`` for every ``t[j]``."""
    cdef double[::1] E_ = np.ascontiguousarray(E, dtype=np.float64)
    cdef double complex[::1] w_ = np.ascontiguousarray(w, dtype=np.complex128)
    cdef double[::1] t_ = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t nt = t_.shape[0]
    out = np.zeros(nt, dtype=np.complex128)
    cdef double complex[::1] out_ = out
    cdef double t0 = 0.0, dt = 0.0
    cdef bint uniform = False
    if nt > 2:
        steps = np.diff(np.asarray(t_))
        dt = (t_[nt - 1] - t_[0]) / (nt - 1)
        uniform = dt > 0 and np.max(np.abs(steps - dt)) <= 1e-12 * max(1.0, fabs(dt))
        t0 = t_[0]
    cdef double[::1] re_, im_
    if uniform:
        re = np.zeros(nt)
        im = np.zeros(nt)
        re_ = re
        im_ = im
        with nogil:
            _fourier_uniform(E_, w_, t0, dt, nt, re_, im_)
        return re + 1j * im
    with nogil:
        _fourier_direct(E_, w_, t_, out_)
    return out


def causal_convolution(c, a):
    """Discrete causal convolution ``out[n] = sum_{k<=n} c[k] a[n-k]``."""
    cdef double complex[::1] c_ = np.ascontiguousarray(c, dtype=np.complex128)
    cdef double complex[::1] a_ = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t N = a_.shape[0]
    if c_.shape[0] < N:
        raise ValueError("weights shorter than signal")
    out = np.zeros(N, dtype=np.complex128)
    cdef double complex[::1] out_ = out
    cdef Py_ssize_t n, k
    cdef double complex acc
    with nogil:
        for n in range(N):
            acc = 0.0
            for k in range(n + 1):
                acc = acc + c_[k] * a_[n - k]
            out_[n] = acc
    return out


def hilbert_sum(x, E, wd, w, dx, double rtol):
    """Subtracted principal-value sums; see ``decaylab._pykernels.hilbert_sum``."""
    cdef double[::1] x_ = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] E_ = np.ascontiguousarray(E, dtype=np.float64)
    cdef double[::1] wd_ = np.ascontiguousarray(wd, dtype=np.float64)
    cdef double[::1] w_ = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] dx_ = np.ascontiguousarray(dx, dtype=np.float64)
    cdef Py_ssize_t nx = x_.shape[0], nE = E_.shape[0], j, m
    S = np.zeros(nx)
    wc = np.zeros(nx)
    cdef double[::1] S_ = S
    cdef double[::1] wc_ = wc
    cdef double acc, skipped, diff, eps
    with nogil:
        for j in range(nx):
            acc = 0.0
            skipped = 0.0
            eps = rtol * (1.0 + fabs(x_[j]))
            for m in range(nE):
                diff = x_[j] - E_[m]
                if fabs(diff) <= eps:
                    skipped += w_[m]
                else:
                    acc += (wd_[m] - w_[m] * dx_[j]) / diff
            S_[j] = acc
            wc_[j] = skipped
    return S, wc
