"""Photon spectrum of Breit-Wigner spontaneous emission at finite times.

For a level of energy ``M`` and width ``G`` prepared at ``t = 0`` the
emitted photon has, at time ``t``, the energy distribution

    eta(t, w) = (G / 2 pi) |exp(-i w t) - exp(-i (M - i G/2) t)|**2 / ((w - M)**2 + G**2 / 4)

which tends to the Lorentzian for ``t -> oo`` and integrates to the decayed
fraction ``1 - exp(-G t)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .numerics import find_root_bisect


def photon_spectrum(M, width, t, omega):
    """``eta(t, omega)`` for an array of photon energies.

    The squared modulus is written as ``(1 - e**-a)**2 + 4 e**-a sin(x t / 2)**2``
    with ``a = G t / 2`` and ``x = omega - M``, which has no cancellation near
    resonance or at small ``t``.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    if not width > 0:
        raise ValueError("width must be > 0")
    x = np.asarray(omega, dtype=float) - M
    a = 0.5 * width * t
    num = np.expm1(-a) ** 2 + 4.0 * math.exp(-a) * np.sin(0.5 * x * t) ** 2
    out = (width / (2 * math.pi)) * num / (x ** 2 + 0.25 * width ** 2)
    return out if out.ndim else float(out)


def emitted_fraction(width, t):
    """``1 - exp(-G t)``, the total weight of ``eta(t, .)``."""
    return -math.expm1(-width * t)


def linewidth(M, width, t, tol=1e-12):
    """Full width at half maximum ``delta_omega(t)`` of ``eta(t, .)``.

    The half-height point is the first crossing above ``M``: the bracket
    grows geometrically from ``G / 4`` and, since the spectrum rings with
    period ``2 pi / t`` at small ``t``, the last bracket step is scanned on
    a sub-period grid before bisecting.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    half = 0.5 * photon_spectrum(M, width, t, M)

    def g(x):
        return photon_spectrum(M, width, t, M + x) - half

    lo, hi = 0.0, 0.25 * width
    while g(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e12 * width:
            raise ArithmeticError("no half-height crossing found")
    # first sign change inside (lo, hi]
    n = max(8, int(math.ceil((hi - lo) * t / (2 * math.pi) * 16)))
    xs = np.linspace(lo, hi, n + 1)
    gs = g(xs)
    k = int(np.argmax(gs <= 0))
    x = find_root_bisect(g, xs[k - 1], xs[k], tol=tol * max(xs[k], width))
    return 2.0 * x


@dataclass
class EmissionSpectrum:
    t: float
    omega: np.ndarray
    eta: np.ndarray
    delta_omega: float
    M: float
    width: float


def emission_spectrum(M, width, t, omega=None, n_points=2001, span=None):
    """Tabulate ``eta(t, .)`` together with its linewidth.

    Without an explicit grid, ``omega`` covers ``M +- span`` with ``span``
    eight linewidths by default.
    """
    dw = linewidth(M, width, t)
    if omega is None:
        span = span if span is not None else 8.0 * dw
        omega = np.linspace(M - span, M + span, n_points)
    omega = np.asarray(omega, dtype=float)
    return EmissionSpectrum(t=float(t), omega=omega, eta=np.asarray(photon_spectrum(M, width, t, omega)),
                            delta_omega=dw, M=M, width=width)
