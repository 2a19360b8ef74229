"""Survival amplitude, decay densities and per-channel decay densities.

The survival amplitude is the Fourier transform of the spectral function.
Per-channel decay densities come from the exact Lee dynamics: with the
memory kernel of channel ``i``

    K_i(tau) = -(1/pi) int dE Im Sigma_i(E) exp(-i E tau)

the channel amplitude ``A_i(t) = -i int_0^t K_i(t - t') a(t') dt'`` gives
``h_i(t) = 2 Im[a(t) conj(A_i(t))]`` and ``sum_i h_i = -p'``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .lee import LeeModel, Window, lee_spectral_function
from .numerics import DEFAULT_CONFIG, adaptive_rule
from .spectral import PowerTail, _power_fourier, moment

_UNIFORM_RTOL = 1e-9


class ConvolutionError(RuntimeError):
    """The memory-kernel convolution failed its step-halving self-check."""


# -- closed-form Breit-Wigner path --------------------------------------------

def bw_survival_amplitude(M, width, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * M * t - 0.5 * width * t)


def bw_survival_probability(width, t):
    return np.exp(-width * np.asarray(t, dtype=float))


def bw_decay_density(width, t):
    return width * np.exp(-width * np.asarray(t, dtype=float))


# -- survival -----------------------------------------------------------------

@dataclass
class SurvivalSeries:
    t: np.ndarray
    a: np.ndarray
    p: np.ndarray
    h: np.ndarray

    def interpolate(self, t):
        """Cubic-spline ``a`` and ``p = |a|**2`` clipped to ``[0, 1]``.

        The spline acts on the envelope ``a exp(i w0 t)``, with ``w0`` the
        amplitude-weighted mean phase rate of the samples, so the carrier
        does not need to be resolved.  A monotone spline on ``p`` itself
        would flatten the quadratic start.
        """
        t = np.asarray(t, dtype=float)
        step = self.a[1:] * np.conj(self.a[:-1])
        w0 = -np.sum(np.abs(step) * np.angle(step) / np.diff(self.t)) / max(np.sum(np.abs(step)), 1e-300)
        ts, env = self.t, self.a * np.exp(1j * w0 * self.t)
        if ts[0] == 0:  # a(-t) = conj(a(t)) fixes the end condition at the origin
            ts = np.concatenate([-ts[:0:-1], ts])
            env = np.concatenate([np.conj(env[:0:-1]), env])
        a = (CubicSpline(ts, env.real)(t) + 1j * CubicSpline(ts, env.imag)(t)) * np.exp(-1j * w0 * t)
        p = np.clip(np.abs(a) ** 2, 0.0, 1.0)
        return a, p


def _transform(spectral, t, cfg, power, backend=None):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    # total weight from the same quadrature rule as the transform, so a(0) = 1
    weight = spectral.transform(np.array([0.0, t.max()]), cfg, power=0, backend=backend)[0].real
    out = spectral.transform(t, cfg, power=power, backend=backend) / weight
    if power == 0:
        out[t == 0] = 1.0  # <S|S>, free of summation-order rounding
    return out


def survival_amplitude(spectral, t, cfg=DEFAULT_CONFIG):
    """``a(t) = int d_S(E) exp(-i E t) dE`` (continuum, tails and poles).

    The result is divided by the numerically integrated total weight, so
    ``a(0) = 1`` holds to rounding; :func:`decaylab.lee.normalization`
    reports that weight itself.
    """
    out = _transform(spectral, t, cfg, 0)
    return out if np.ndim(t) else complex(out[0])


def survival_probability(spectral, t, cfg=DEFAULT_CONFIG):
    a = survival_amplitude(spectral, t, cfg)
    return np.abs(a) ** 2


def decay_density(spectral, t, cfg=DEFAULT_CONFIG):
    """``h(t) = -p'(t) = -2 Re[conj(a) a']`` with ``a' = -i int E d_S e^{-iEt}``.

    Spectra without a finite first moment (pure Breit-Wigner) are refused;
    use :func:`bw_decay_density` for those.
    """
    a = _transform(spectral, t, cfg, 0)
    da = -1j * _transform(spectral, t, cfg, 1)
    h = -2.0 * np.real(np.conj(a) * da)
    return h if np.ndim(t) else float(h[0])


def survival_series(spectral, t, cfg=DEFAULT_CONFIG):
    t = np.asarray(t, dtype=float)
    a = _transform(spectral, t, cfg, 0)
    p = np.abs(a) ** 2
    if spectral.first_moment_finite():
        da = -1j * _transform(spectral, t, cfg, 1)
        h = -2.0 * np.real(np.conj(a) * da)
    else:
        h = np.full(t.shape, np.nan)
    return SurvivalSeries(t=t, a=a, p=p, h=h)


# -- short-time regime ----------------------------------------------------------

def energy_variance(spectral, cfg=DEFAULT_CONFIG):
    """``<E**2> - <E>**2`` (normalized); inf when the second moment diverges."""
    m2 = moment(spectral, 2, cfg)
    if m2.divergent:
        return math.inf
    W = moment(spectral, 0, cfg).value
    m1 = moment(spectral, 1, cfg).value / W
    return m2.value / W - m1 * m1


def short_time_slope(spectral, cfg=DEFAULT_CONFIG, window=(1e-3, 1e-2), n=20):
    """Fitted slope of ``log(1 - p)`` against ``log t`` on ``window / Delta E``."""
    dE = math.sqrt(energy_variance(spectral, cfg))
    t = np.geomspace(window[0] / dE, window[1] / dE, n)
    q = 1.0 - survival_probability(spectral, t, cfg)
    return float(np.polyfit(np.log(t), np.log(q), 1)[0])


def quadratic_regime_duration(spectral, t, cfg=DEFAULT_CONFIG, rel=0.1):
    """Largest grid time before ``1 - p`` first leaves ``(1 +- rel) Delta E**2 t**2``.

    ``t`` should start small enough (a fraction of ``1 / Delta E``) for the
    quadratic law to hold at its first point.
    """
    t = np.asarray(t, dtype=float)
    var = energy_variance(spectral, cfg)
    q = 1.0 - survival_probability(spectral, t, cfg)
    dev = np.zeros_like(t)  # t = 0 satisfies the law trivially
    pos = t > 0
    dev[pos] = np.abs(q[pos] / (var * t[pos] ** 2) - 1.0)
    out = np.nonzero(dev > rel)[0]
    if out.size == 0:
        return float(t[-1])
    if out[0] == 0:
        raise ValueError("quadratic law already violated at the first time point")
    return float(t[out[0] - 1])


# -- memory kernels -----------------------------------------------------------

def _phi(z):
    """Hat-function moments ``int_0^1 exp(-i z v) (1 - v, v) dv``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    e = np.exp(-1j * zs)
    phi0 = -1j / zs + (1 - e) / zs ** 2
    phi1 = -(1 - e) / zs ** 2 + 1j * e / zs
    if np.any(small):
        x = -1j * z[small]
        s0 = np.zeros(x.shape, dtype=complex)
        s1 = np.zeros(x.shape, dtype=complex)
        term = np.ones(x.shape, dtype=complex)
        for k in range(18):
            # int_0^1 v**m exp(x v) dv = sum_k x**k / (k! (k + m + 1))
            s1 += term / (k + 2)
            s0 += term / ((k + 1) * (k + 2))
            term = term * x / (k + 1)
        phi0[small] = s0
        phi1[small] = s1
    return phi0, phi1


@dataclass
class KernelSource:
    """``K(tau) = sum_n weights[n] exp(-i nodes[n] tau) + tails + c delta(tau)``."""

    nodes: np.ndarray
    weights: np.ndarray
    tails: tuple = ()
    delta_coefficient: float = 0.0

    def __call__(self, tau, backend=None):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = kernels.fourier_sum(self.nodes, self.weights, tau, backend=backend)
        for tail in self.tails:
            out = out + tail.fourier(tau)
        return out

    def product_weights(self, h, n, center=0.0):
        """Cell integrals of the demodulated kernel against hat functions.

        With ``Kc(tau) = exp(i center tau) K(tau)`` returns ``alpha_j`` and
        ``beta_j`` (``j < n``), the integrals of ``Kc(j h + u)`` times
        ``1 - u/h`` and ``u/h`` over ``0 < u < h``.  They are exact for the
        quadrature representation, so oscillating or log-singular kernels
        need no special treatment.
        """
        lags = np.arange(n) * h
        y = self.nodes - center
        phi0, phi1 = _phi(y * h)
        alpha = h * kernels.fourier_sum(y, self.weights * phi0, lags)
        beta = h * kernels.fourier_sum(y, self.weights * phi1, lags)
        for tail in self.tails:
            if tail.center != center or tail.side != 1:
                raise ValueError("kernel tails must be upper tails about the demodulation center")
            L = tail.start_distance
            for coef, m in tail.terms:
                p1 = _power_fourier(m + 1, L, lags)
                p1_next = _power_fourier(m + 1, L, lags + h)
                p2 = _power_fourier(m + 2, L, lags)
                p2_next = _power_fourier(m + 2, L, lags + h)
                alpha += coef * (-1j * p1 + (p2 - p2_next) / h)
                beta += coef * (-(p2 - p2_next) / h + 1j * p1_next)
        return alpha, beta


def channel_kernel_source(model, channel_index, t_max, cfg=DEFAULT_CONFIG):
    """Quadrature representation of ``K_i`` built from ``Im Sigma_i(E)``."""
    ch = model.channels[channel_index]
    if ch.memoryless:
        return KernelSource(np.zeros(0), np.zeros(0, dtype=complex), delta_coefficient=ch.g2)
    lo, hi = ch.energy_support()
    width = 2 * math.pi / t_max / cfg.oscillation_points_per_period if t_max > 0 else None

    def weight(E):
        return -ch.imag_self_energy(E) / math.pi

    rule = adaptive_rule(weight, lo, hi, cfg, points=ch.energy_knots(), max_width=width)
    return KernelSource(rule.nodes, (rule.weights * rule.values).astype(complex))


def channel_kernel(model, channel_index, tau, cfg=DEFAULT_CONFIG):
    """``K_i(tau)`` by oscillatory quadrature over the energy form.

    Memoryless channels have ``K = g**2 delta(tau)``; asking for their
    kernel values is an error.
    """
    ch = model.channels[channel_index]
    if ch.memoryless:
        raise ValueError("memoryless channel: K(tau) = g**2 delta(tau) is handled analytically")
    tau = np.asarray(tau, dtype=float)
    src = channel_kernel_source(model, channel_index, float(np.max(tau)), cfg)
    out = src(tau)
    return out if np.ndim(tau) else complex(out[0])


def window_kernel_closed_form(channel, tau):
    """Closed-form ``K(tau)`` of a window channel."""
    if not isinstance(channel.form_factor, Window):
        raise TypeError("closed form only for window channels")
    lo, hi = channel.energy_support()
    tau = np.asarray(tau, dtype=float)
    c = channel.g2 / (2 * math.pi)
    safe = np.where(tau == 0, 1.0, tau)
    val = c * (np.exp(-1j * lo * safe) - np.exp(-1j * hi * safe)) / (1j * safe)
    return np.where(tau == 0, c * (hi - lo), val)


# -- per-channel decay densities -----------------------------------------------

@dataclass
class ChannelDensities:
    t: np.ndarray
    h_channels: np.ndarray  # shape (n_channels, n_t)
    p: np.ndarray
    h: np.ndarray
    correction: float = 0.0  # step-halving estimate of the convolution error

    @property
    def ratio(self):
        return density_ratio(self)

    def sum_rule_residual(self):
        """``max |sum_i h_i - h|`` relative to ``max |h|``."""
        scale = np.max(np.abs(self.h))
        return float(np.max(np.abs(self.h_channels.sum(axis=0) - self.h)) / scale)


def density_ratio(cd, first=0, second=1, floor_factor=1e-12):
    """``h_first / h_second`` on the grid; NaN where ``|h_second|`` is below
    ``floor_factor * max h_second`` (the undefined flag)."""
    if cd.h_channels.shape[0] < 2:
        raise ValueError("ratio needs at least two channels")
    h1 = cd.h_channels[first]
    h2 = cd.h_channels[second]
    floor = floor_factor * np.max(np.abs(h2))
    out = np.full(h1.shape, np.nan)
    ok = np.abs(h2) > floor
    out[ok] = h1[ok] / h2[ok]
    return out


def _check_uniform(t):
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be 1-d with at least two points")
    if t[0] != 0:
        raise ValueError("time grid must start at t = 0")
    dt = t[1] - t[0]
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > _UNIFORM_RTOL * max(1.0, t[-1]):
        raise ValueError("time grid must be uniform and increasing")
    return t, dt


def _channel_amplitude(src, at, h, center):
    """``A(t_n) = -i int_0^t_n K(t_n - t') a(t') dt'`` (demodulated) on a step-``h`` grid."""
    N = at.size
    A = np.zeros(N, dtype=complex)
    if src.nodes.size or src.tails:
        alpha, beta = src.product_weights(h, N, center)
        gamma = alpha.copy()
        gamma[1:] += beta[:-1]
        A += -1j * (kernels.causal_convolution(gamma, at) - alpha * at[0])
    if src.delta_coefficient:
        # half of a delta at the end point
        A += -0.5j * src.delta_coefficient * at
    return A


def kernel_densities(spectral, sources, t, cfg=DEFAULT_CONFIG, step=None, center=0.0,
                     conv_tol=1e-5):
    """Per-channel decay densities from kernel sources on a uniform grid.

    The convolution uses product integration (kernel cells integrated
    exactly, ``a`` linear on each cell) on an internal step ``h``, the
    output step divided by an integer, and on ``h / 2``.  The two are
    combined by Richardson extrapolation and their difference is the
    self-check.  ``center`` demodulates the fast phase ``exp(-i center t)``
    of ``a``; ``h_i`` does not depend on it.
    """
    t, dt = _check_uniform(t)
    h_max = step if step is not None else 0.02
    refine = max(1, int(math.ceil(dt / h_max - 1e-9)))
    h = dt / refine
    n_coarse = (t.size - 1) * refine + 1
    fine = np.arange(2 * n_coarse - 1) * (h / 2)

    a_fine = _transform(spectral, fine, cfg, 0)
    at = a_fine * np.exp(1j * center * fine)

    amps = []
    corrections = []
    for src in sources:
        A_half = _channel_amplitude(src, at, h / 2, center)[::2]
        A_full = _channel_amplitude(src, at[::2], h, center)
        amps.append(A_half + (A_half - A_full) / 3.0)
        corrections.append(float(np.max(np.abs(A_half - A_full))) / 3.0)

    idx = np.arange(t.size) * refine
    a_c = at[::2][idx]
    h_channels = np.array([2.0 * np.imag(a_c * np.conj(A[idx])) for A in amps])

    a = a_fine[::2][idx]
    p = np.abs(a) ** 2
    if spectral.first_moment_finite():
        da = -1j * _transform(spectral, t, cfg, 1)
        hh = -2.0 * np.real(np.conj(a) * da)
    else:
        # no finite mean energy: fall back to differencing p on the fine grid
        hh = -np.gradient(np.abs(a_fine) ** 2, h / 2, edge_order=2)[::2][idx]
    correction = max(corrections) if corrections else 0.0
    if correction > conv_tol:
        raise ConvolutionError(
            f"convolution step-halving difference {correction:.3g} exceeds {conv_tol:g}; "
            "refine the internal step")
    return ChannelDensities(t=t, h_channels=h_channels, p=p, h=hh, correction=correction)


def partial_decay_densities(model: LeeModel, t, cfg=DEFAULT_CONFIG, step=None, conv_tol=1e-5):
    """Per-channel decay densities ``h_i(t)`` of a Lee model on a uniform grid."""
    t = np.asarray(t, dtype=float)
    spectral = lee_spectral_function(model, cfg)
    t_max = float(t[-1])
    sources = [channel_kernel_source(model, i, t_max, cfg) for i in range(len(model.channels))]
    return kernel_densities(spectral, sources, t, cfg, step=step, center=model.M,
                            conv_tol=conv_tol)


# -- kernels of an arbitrary spectral function ------------------------------------

def _tail_cauchy(tail, x):
    """``int_tail d(E) / (x - E) dE`` for points ``x`` on the near side of the tail."""
    X = tail.side * (np.asarray(x, dtype=float) - tail.center)
    L = tail.start_distance
    if np.any(X >= L):
        raise ValueError("point inside the tail")
    out = np.zeros(X.shape)
    small = np.abs(X) < 0.5 * L
    for coef, n in tail.terms:
        # int_L^inf u**-n / (X - u) du
        val = np.zeros(X.shape)
        if np.any(small):
            Xs = X[small]
            acc = np.zeros(Xs.shape)
            term = np.ones(Xs.shape)
            for k in range(60):
                acc -= term * L ** (-(n + k)) / (n + k)
                term = term * Xs
            val[small] = acc
        big = ~small
        if np.any(big):
            Xb = X[big]
            acc = Xb ** (-n) * np.log1p(-Xb / L)
            for j in range(2, n + 1):
                acc += Xb ** (j - n - 1) * L ** (1 - j) / (j - 1)
            val[big] = acc
        out += coef * val
    # 1/(x - E) = side / (X - u)
    return tail.side * out


def resolvent_real_part(spectral, x, cfg=DEFAULT_CONFIG):
    """``Re G(x) = PV int d_S(E) / (x - E) dE + sum_p Z_p / (x - E_p)`` inside the window.

    The continuum part is a subtracted sum over the converged quadrature rule
    of ``d_S``: ``sum w (d(E) - d(x)) / (x - E) + d(x) ln((x - lo) / (hi - x))``.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = spectral.window
    rule = spectral.rule(0.0, cfg)
    dx = spectral.density(x)
    S, wc = kernels.hilbert_sum(x, rule.nodes, rule.weights * rule.values, rule.weights, dx)
    out = S + dx * np.log((x - lo) / (hi - x))
    hit = wc > 0
    if np.any(hit):
        # coincident nodes: the subtracted quotient tends to -d'(x)
        xs = x[hit]
        step = np.minimum(1e-6 * np.maximum(1.0, np.abs(xs)), 0.5 * np.minimum(xs - lo, hi - xs))
        deriv = (spectral.density(xs + step) - spectral.density(xs - step)) / (2 * step)
        out[hit] -= deriv * wc[hit]
    for tail in spectral.tails:
        out += _tail_cauchy(tail, x)
    for p in spectral.poles:
        out += p.weight / (x - p.energy)
    return out


def embedded_kernel_sources(spectral, branchings, t_max, cfg=DEFAULT_CONFIG, tail_branchings=None,
                            center=0.0):
    """Kernel sources of the Lee model whose spectral function is ``spectral``.

    Any normalized ``d_S`` with resolvent ``G`` belongs to a single-level Lee
    model with ``|Im Sigma| = pi d_S / |G|**2``; ``branchings[i](E)`` splits
    it into channels (fractions summing to one).  The kernel density
    ``d_S / |G|**2`` continues beyond a ``+1`` tail as ``b1/y + b2/y**2``
    with ``y = E - center`` (``b1`` from the tail's ``E**-3`` coefficient,
    ``b2`` by continuity).
    """
    W = spectral.total_weight(cfg)
    rule = spectral.rule(t_max, cfg)
    E = rule.nodes
    d = rule.values / W
    re = resolvent_real_part(spectral, E, cfg) / W
    k = d / (re ** 2 + (math.pi * d) ** 2)

    tails_k = None
    if spectral.tails:
        if len(spectral.tails) != 1 or spectral.tails[0].side != 1 or spectral.tails[0].center != 0:
            raise NotImplementedError("kernel tails only for a single upper tail about E = 0")
        tail = spectral.tails[0]
        a3 = dict((n, c) for c, n in tail.terms).get(3)
        if a3 is None:
            raise NotImplementedError("kernel tail needs an E**-3 density tail")
        b1 = a3 / W
        j = int(np.argmax(E))
        y = E[j] - center
        b2 = (k[j] - b1 / y) * y ** 2
        tails_k = (b1, b2, tail.start_distance - center)

    sources = []
    for i, branch in enumerate(branchings):
        weights = (rule.weights * k * branch(E)).astype(complex)
        tails = ()
        if tails_k is not None:
            b1, b2, L = tails_k
            f = tail_branchings[i] if tail_branchings is not None else \
                float(branch(np.array([L + center]))[0])
            tails = (PowerTail(+1, center, L, ((f * b1, 1), (f * b2, 2))),)
        sources.append(KernelSource(E, weights, tails))
    return sources
