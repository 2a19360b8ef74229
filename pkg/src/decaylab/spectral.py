"""Spectral functions: continuum density, discrete poles and power-law tails.

A :class:`SpectralFunction` is what the time-evolution code consumes.  The
continuum is integrated numerically on a finite window; anything beyond
the window is described by :class:`PowerTail` expansions whose Fourier
integrals are known in closed form (generalized exponential integrals).
"""

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
from scipy import special

from .numerics import DEFAULT_CONFIG, QuadratureRule, adaptive_rule


@dataclass(frozen=True)
class Pole:
    """Discrete (bound-state) contribution ``weight * delta(E - energy)``.

    ``offset`` is the signed distance to the nearest continuum edge when the
    pole was located in edge coordinates; ``at_edge`` marks poles closer to
    the edge than floating point can separate from it.  ``decay_rate`` is
    nonzero for a continuum resonance too narrow to resolve on the energy
    axis, lumped into one term decaying as ``exp(-decay_rate * t)``.
    """

    energy: float
    weight: float
    offset: float = math.nan
    at_edge: bool = False
    decay_rate: float = 0.0


@dataclass(frozen=True)
class PowerTail:
    """Density ``sum_k c_k * x**(-n_k)`` with ``x = side * (E - center)``.

    Valid for ``x >= start_distance``, i.e. beyond ``center + side *
    start_distance``.
    """

    side: int
    center: float
    start_distance: float
    terms: tuple  # ((coefficient, exponent), ...)

    @property
    def edge(self):
        return self.center + self.side * self.start_distance

    @property
    def leading_exponent(self):
        return min(n for c, n in self.terms if c != 0)

    def density(self, E):
        x = self.side * (np.asarray(E, dtype=float) - self.center)
        return sum(c * x ** (-float(n)) for c, n in self.terms)

    def fourier(self, t, power=0):
        """``int_tail E**power d(E) exp(-i E t) dE`` for an array of ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        L, s, c0 = self.start_distance, self.side, self.center
        out = np.zeros(t.shape, dtype=complex)
        # E**power = sum_j binom(power, j) c0**(power-j) (s x)**j
        for coef, n in self.terms:
            for j in range(power + 1):
                pref = coef * math.comb(power, j) * c0 ** (power - j) * s ** j
                if pref == 0:
                    continue
                out += pref * _power_fourier(n - j, L, s * t)
        return out * np.exp(-1j * c0 * t)

    def moment_terms(self, power):
        """Exponents ``m`` of the ``x**-m`` pieces in ``E**power * density``."""
        return [n - j for c, n in self.terms if c != 0 for j in range(power + 1)]


def _power_fourier(m, L, tau):
    """``int_L^inf x**(-m) exp(-i x tau) dx`` for an array of ``tau``."""
    tau = np.asarray(tau, dtype=float)
    out = np.empty(tau.shape, dtype=complex)
    zero = tau == 0
    if np.any(zero):
        if m <= 1:
            out[zero] = np.inf
        else:
            out[zero] = L ** (1 - m) / (m - 1)
    nz = ~zero
    if np.any(nz):
        z = 1j * L * tau[nz]
        out[nz] = L ** (1 - m) * _expn_complex(m, z)
    return out


def _expn_complex(n, z):
    """Generalized exponential integral ``E_n(z)``, complex ``z``, ``n >= 1``."""
    if n < 1:
        raise ValueError("order must be >= 1")
    e = special.exp1(z)
    for k in range(1, n):
        e = (np.exp(-z) - z * e) / k
    return e


@dataclass
class SpectralFunction:
    """Energy distribution ``d_S(E)`` of an unstable state.

    ``density`` is a vectorized callable; ``window`` the finite interval on
    which it is integrated numerically (the support, or a truncation of it
    when ``tails`` are given); ``breakpoints`` are points where the density
    is not smooth.  ``extra`` holds ``(nodes, weights, values)`` pieces of
    the continuum integrated off the energy axis (the density is zero there
    on the axis); they are merged into every rule.
    """

    density: Callable
    window: tuple
    breakpoints: tuple = ()
    poles: tuple = ()
    tails: tuple = ()
    support: tuple = None
    label: str = ""
    extra: tuple = ()
    _rules: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.window
        if not lo < hi:
            raise ValueError("empty integration window")
        if self.support is None:
            self.support = (lo, hi)

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        out = np.zeros(E.shape)
        lo, hi = self.window
        inside = (E >= lo) & (E <= hi)
        if np.any(inside):
            out[inside] = self.density(E[inside])
        for tail in self.tails:
            beyond = tail.side * (E - tail.edge) > 0
            if np.any(beyond):
                out[beyond] = tail.density(E[beyond])
        return out if out.ndim else float(out)

    def rule(self, t_max=0.0, cfg=DEFAULT_CONFIG):
        """Quadrature rule for the continuum, valid for ``|t| <= t_max``."""
        key = (float(t_max), cfg)
        if key not in self._rules:
            width = None
            if t_max > 0:
                width = 2 * math.pi / t_max / cfg.oscillation_points_per_period
            rule = adaptive_rule(self.density, *self.window, cfg,
                                 points=self.breakpoints, max_width=width)
            if self.extra:
                nodes, weights, values = (np.concatenate([getattr(rule, k)] + [e[i] for e in self.extra])
                                          for i, k in enumerate(("nodes", "weights", "values")))
                order = np.argsort(nodes, kind="stable")
                extra = sum(float(np.dot(e[1], e[2])) for e in self.extra)
                rule = QuadratureRule(nodes[order], weights[order], values[order], rule.value + extra,
                                      rule.error, rule.n_panels)
            self._rules[key] = rule
        return self._rules[key]

    def pole_weight(self):
        return sum(p.weight for p in self.poles)

    def continuum_weight(self, cfg=DEFAULT_CONFIG):
        tails = sum(float(np.real(tl.fourier(0.0)[0])) for tl in self.tails)
        return float(self.rule(0.0, cfg).value) + tails

    def total_weight(self, cfg=DEFAULT_CONFIG):
        return self.continuum_weight(cfg) + self.pole_weight()

    def first_moment_finite(self):
        return all(m > 1 for tl in self.tails for m in tl.moment_terms(1))

    def transform(self, t, cfg=DEFAULT_CONFIG, power=0, backend=None):
        """``int E**power d_S(E) exp(-i E t) dE`` including poles and tails."""
        from . import kernels

        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise ValueError("t must be non-negative")
        if any(m <= 1 for tl in self.tails for m in tl.moment_terms(power)) and power > 0:
            raise DivergentMomentError(
                f"tail exponent makes the E**{power} transform divergent; "
                "use the closed-form path")
        rule = self.rule(float(t.max()), cfg)
        w = rule.weights * rule.values * rule.nodes ** power
        out = kernels.fourier_sum(rule.nodes, w, t, backend=backend)
        for tail in self.tails:
            out = out + tail.fourier(t, power)
        for p in self.poles:
            out = out + p.weight * p.energy ** power * np.exp(-1j * p.energy * t - p.decay_rate * t)
        return out


class DivergentMomentError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Moment:
    value: float
    divergent: bool = False


def moment(spectral, n, cfg=DEFAULT_CONFIG):
    """``<E**n>`` including poles; flags divergence from the tail exponents."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if any(m <= 1 for tl in spectral.tails for m in tl.moment_terms(n)):
        return Moment(math.inf, divergent=True)
    rule = spectral.rule(0.0, cfg)
    value = float(np.sum(rule.weights * rule.values * rule.nodes ** n))
    for tail in spectral.tails:
        value += float(np.real(tail.fourier(0.0, n)[0]))
    value += sum(p.weight * p.energy ** n for p in spectral.poles)
    return Moment(value)


def breit_wigner_density(E, M, width):
    """Lorentzian ``(G / 2 pi) / ((E - M)**2 + G**2 / 4)``."""
    E = np.asarray(E, dtype=float)
    return width / (2 * np.pi) / ((E - M) ** 2 + width ** 2 / 4)


def lorentzian_tails(M, width, half_range, n_terms=4):
    """Large-|E - M| expansions of the Lorentzian on both sides."""
    a = width / (2 * np.pi)
    q = width ** 2 / 4
    terms = tuple((a * (-q) ** k, 2 + 2 * k) for k in range(n_terms))
    return (PowerTail(-1, M, half_range, terms), PowerTail(+1, M, half_range, terms))
