"""Lee (Friedrichs) Hamiltonian: one discrete level coupled to continua.

Each decay channel carries a coupling ``g`` (energy**1/2), a form factor
``f(k)`` and the linear dispersion ``omega(k) = k + alpha``.  The channel
self-energy is

    Sigma_i(E + i0) = (g_i**2 / 2 pi) int dk f_i(k)**2 / (E - omega_i(k) + i0)

and the spectral function of the discrete state follows from the resolvent
``1 / (E - M - sum_i Sigma_i)``.  Bound states below/above/between the
continua carry the weight missing from the continuum integral.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .numerics import (
    DEFAULT_CONFIG,
    adaptive_rule,
    find_root_bisect,
    integrate_adaptive,
    integrate_principal_value,
)
from .spectral import Pole, SpectralFunction, lorentzian_tails


@dataclass(frozen=True)
class ConstantOne:
    """``f(k) = 1`` for all k: the memoryless (Breit-Wigner) coupling."""

    def __call__(self, k):
        return np.ones_like(np.asarray(k, dtype=float))

    def support(self):
        return (-math.inf, math.inf)

    def knots(self):
        return ()


@dataclass(frozen=True)
class Window:
    """``f(k) = theta(k - E0) theta(Lambda - k)``."""

    E0: float
    Lambda: float

    def __post_init__(self):
        if not self.E0 < self.Lambda:
            raise ValueError(f"window needs E0 < Lambda, got E0={self.E0}, Lambda={self.Lambda}")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return ((k > self.E0) & (k < self.Lambda)).astype(float)

    def support(self):
        return (self.E0, self.Lambda)

    def knots(self):
        return (self.E0, self.Lambda)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear ``f(k)`` through ``(k, f)`` samples, zero outside.

    Form factors that do not vanish at the ends produce logarithmically
    divergent level shifts there, like the window.
    """

    k: tuple
    f: tuple

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if k.ndim != 1 or k.size < 2 or k.shape != f.shape:
            raise ValueError("tabulated form factor needs matching 1-d k and f with >= 2 points")
        if np.any(np.diff(k) <= 0):
            raise ValueError("tabulated k grid must be strictly increasing")
        if np.any(f < 0):
            raise ValueError("tabulated form factor must be non-negative")
        object.__setattr__(self, "k", tuple(float(v) for v in k))
        object.__setattr__(self, "f", tuple(float(v) for v in f))

    def __call__(self, k):
        return np.interp(np.asarray(k, dtype=float), self.k, self.f, left=0.0, right=0.0)

    def support(self):
        return (self.k[0], self.k[-1])

    def knots(self):
        return self.k


@dataclass(frozen=True)
class Channel:
    coupling: float
    form_factor: object = field(default_factory=ConstantOne)
    alpha: float = 0.0

    def __post_init__(self):
        if self.coupling < 0:
            raise ValueError("coupling g must be >= 0")

    @classmethod
    def from_g2(cls, g2, form_factor=None, alpha=0.0):
        return cls(math.sqrt(g2), form_factor if form_factor is not None else ConstantOne(), alpha)

    @property
    def g2(self):
        return self.coupling ** 2

    @property
    def memoryless(self):
        return isinstance(self.form_factor, ConstantOne)

    def energy_support(self):
        lo, hi = self.form_factor.support()
        return (lo + self.alpha, hi + self.alpha)

    def energy_knots(self):
        return tuple(k + self.alpha for k in self.form_factor.knots())

    def f2_at_energy(self, E):
        return self.form_factor(np.asarray(E, dtype=float) - self.alpha) ** 2

    def imag_self_energy(self, E):
        """``Im Sigma(E + i0) = -(g**2 / 2) f(E - alpha)**2``."""
        return -0.5 * self.g2 * self.f2_at_energy(E)

    def real_self_energy(self, E, shift=0.0, cfg=DEFAULT_CONFIG):
        """Level shift at ``E + shift``.

        ``shift`` lets callers resolve energies closer to a window edge than
        the float spacing at ``E`` allows: differences are formed as
        ``(E - edge) + shift``.
        """
        E = np.asarray(E, dtype=float)
        ff = self.form_factor
        if isinstance(ff, ConstantOne) or self.g2 == 0:
            return np.zeros(E.shape)
        if isinstance(ff, Window):
            lo, hi = self.energy_support()
            # g2 first: g2 / (2 pi) underflows for subnormal couplings
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return self.g2 * (np.log(np.abs((E - lo) + shift))
                                  - np.log(np.abs((E - hi) + shift))) / (2 * math.pi)
        return np.vectorize(lambda e: self._tabulated_shift(e + shift, cfg), otypes=[float])(E)

    def _tabulated_shift(self, E, cfg):
        lo, hi = self.energy_support()
        knots = self.energy_knots()

        def f2(x):
            return self.f2_at_energy(x)

        if lo < E < hi:
            pv = integrate_principal_value(f2, E, lo, hi, cfg, points=knots)
        else:
            pv = integrate_adaptive(lambda x: f2(x) / (x - E), lo, hi, cfg, points=knots)[0]
        # 1 / (E - x) = -1 / (x - E)
        return -(self.g2 / (2 * math.pi)) * pv

    def self_energy(self, E, cfg=DEFAULT_CONFIG):
        return self.real_self_energy(E, cfg=cfg) + 1j * self.imag_self_energy(E)

    def self_energy_slope(self, E, shift=0.0, cfg=DEFAULT_CONFIG):
        """``d Re Sigma / dE`` at a point outside the channel support."""
        ff = self.form_factor
        if isinstance(ff, ConstantOne) or self.g2 == 0:
            return 0.0
        lo, hi = self.energy_support()
        if isinstance(ff, Window):
            # divide g2 first: 1 / delta overflows for subnormal delta
            return (self.g2 / ((E - lo) + shift) - self.g2 / ((E - hi) + shift)) / (2 * math.pi)
        x0 = E + shift
        val = integrate_adaptive(lambda x: self.f2_at_energy(x) / (x0 - x) ** 2, lo, hi, cfg,
                                 points=self.energy_knots())[0]
        return -(self.g2 / (2 * math.pi)) * val


@dataclass(frozen=True)
class LeeModel:
    M: float
    channels: tuple

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("a Lee model needs at least one channel")
        object.__setattr__(self, "channels", chans)

    @classmethod
    def window(cls, M=2.0, g2=0.36, E0=0.0, Lambda=5.0, alpha=0.0):
        return cls(M, (Channel.from_g2(g2, Window(E0, Lambda), alpha),))

    @classmethod
    def breit_wigner(cls, M=2.0, widths=(0.36,), alphas=None):
        alphas = alphas or (0.0,) * len(widths)
        return cls(M, tuple(Channel.from_g2(w, ConstantOne(), a) for w, a in zip(widths, alphas)))

    @property
    def memoryless(self):
        return any(ch.memoryless for ch in self.channels)


def two_window_model(M=2.0, g2=(0.36, 0.16), E0=(0.0, 0.5), Lambda=5.0):
    """Two window channels sharing the upper edge (default: the reference example)."""
    return LeeModel(M, tuple(Channel.from_g2(g, Window(e, Lambda)) for g, e in zip(g2, E0)))


def self_energy(model, channel_index, E, cfg=DEFAULT_CONFIG):
    """``Sigma_i(E + i0)`` of one channel (complex, vectorized in ``E``)."""
    return model.channels[channel_index].self_energy(E, cfg=cfg)


def total_self_energy(model, E, cfg=DEFAULT_CONFIG):
    return sum(ch.self_energy(E, cfg=cfg) for ch in model.channels)


def spectral_density(model, E, cfg=DEFAULT_CONFIG):
    """Continuum density ``(1/pi) |Im S| / ((E - M - Re S)**2 + (Im S)**2)``."""
    E = np.asarray(E, dtype=float)
    im = sum(ch.imag_self_energy(E) for ch in model.channels)
    out = np.zeros(E.shape)
    mask = im != 0
    if np.any(mask):
        Em = E[mask]
        re = sum(ch.real_self_energy(Em, cfg=cfg) for ch in model.channels)
        imm = im[mask]
        # hypot form: the squares underflow for very weak coupling
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            r = np.hypot(Em - model.M - re, imm)
            val = (-imm / r) / r / math.pi
        out[mask] = np.where(np.isfinite(re), val, 0.0)
    return out if out.ndim else float(out)


def golden_rule_width(model):
    """Fermi-golden-rule widths; returns ``(total, per_channel)``.

    With ``omega(k) = k + alpha`` the resonant mode is ``k_M = M - alpha`` and
    ``|omega'| = 1``.
    """
    widths = []
    for ch in model.channels:
        kM = model.M - ch.alpha
        widths.append(float(ch.g2 * ch.form_factor(kM) ** 2))
    return sum(widths), widths


def _merged_supports(model):
    spans = sorted(ch.energy_support() for ch in model.channels if ch.g2 > 0)
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(s) for s in merged]


_SUBNORMAL = float(np.nextafter(0.0, 1.0))


class PoleSearchError(RuntimeError):
    pass




# lower end of the log(delta) scans; weight closer to an edge than exp(-800)
# is below exp(-50) even for the weakest representable coupling
LOG_DELTA_MIN = -800.0


class _EdgeFrame:
    """Window-only model seen from a support edge, ``E = edge + direction * delta``.

    Methods take ``log(delta)`` as ``lnd + dx``; the offset ``dx`` is kept
    apart so that points closer together than the spacing of ``lnd`` stay
    distinct.  Energies are measured in units of ``sigma = max g**2`` and
    distances to the edge come from the logarithm, so couplings and
    distances deep in the subnormal range keep their relative precision.
    """

    def __init__(self, model, edge, direction):
        self.chans = [ch for ch in model.channels if ch.g2 > 0]
        self.g2 = np.array([ch.g2 for ch in self.chans])
        self.sigma = float(self.g2.max())
        self.log_sigma = math.log(self.sigma)
        self.gi = self.g2 / self.sigma
        self.a = np.array([edge - ch.energy_support()[0] for ch in self.chans])
        self.b = np.array([edge - ch.energy_support()[1] for ch in self.chans])
        self.edge, self.direction = edge, direction
        self.offset = edge - model.M
        self.ulp = float(np.spacing(abs(edge))) if edge != 0 else 0.0

    @staticmethod
    def _args(lnd, dx):
        lnd = np.asarray(lnd, dtype=float)
        dx = np.asarray(dx, dtype=float)
        lnd, dx = np.broadcast_arrays(np.atleast_1d(lnd), dx)
        with np.errstate(over="ignore", under="ignore"):
            delta = np.where(lnd > -700, np.exp(lnd) * np.exp(dx), np.exp(lnd + dx))
        return lnd, dx, delta

    def _shifted(self, c, lnd, dx):
        # c + direction * delta without cancellation: delta = base (1 + expm1(dx))
        with np.errstate(over="ignore", under="ignore"):
            base = np.exp(lnd)
            return (c + self.direction * base) + self.direction * base * np.expm1(dx)

    def _log_dist(self, c, lnd, dx):
        # log|c + direction * delta|, taken from log(delta) when c == 0
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(self._shifted(c[:, None], lnd[None, :], dx[None, :])))
        out[c == 0] = lnd + dx
        return out

    def D(self, lnd, dx=0.0):
        """``(E - M - Re Sigma(E)) / sigma``."""
        lnd, dx, _ = self._args(lnd, dx)
        with np.errstate(over="ignore", invalid="ignore"):
            if self.offset == 0:
                lin = self.direction * np.exp((lnd - self.log_sigma) + dx)
            else:
                # subnormal delta: scale first, delta alone has too few bits
                lin = np.where(lnd > -700, self._shifted(self.offset, lnd, dx) / self.sigma,
                               self.offset / self.sigma + self.direction * np.exp((lnd - self.log_sigma) + dx))
            re = self.gi @ (self._log_dist(self.a, lnd, dx) - self._log_dist(self.b, lnd, dx)) / (2 * math.pi)
        return lin - re

    def gamma(self, lnd, dx=0.0):
        """``|Im Sigma(E)| / sigma``."""
        _, _, delta = self._args(lnd, dx)
        step = np.maximum(delta, 8 * self.ulp if self.ulp else _SUBNORMAL)
        E = self.edge + self.direction * step
        return sum(0.5 * gi * ch.f2_at_energy(E) for gi, ch in zip(self.gi, self.chans))

    def log_weight(self, lnd, dx=0.0):
        """``delta * d_S(E)``, the density per unit ``log(delta)``."""
        D, G = self.D(lnd, dx), self.gamma(lnd, dx)
        lnd, dx, _ = self._args(lnd, dx)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r = np.hypot(D, G)
            y = np.exp((lnd - self.log_sigma) + dx + np.log(G / math.pi) - 2 * np.log(r))
        return np.where(np.isfinite(y), y, 0.0)

    def slope(self, lnd):
        """``d Re Sigma / dE``."""
        delta = math.exp(lnd)
        out = 0.0
        with np.errstate(over="ignore"):
            for g2, a, b in zip(self.g2, self.a, self.b):
                ta, tb = (self.direction * np.exp(math.log(g2) - lnd) if c == 0
                          else g2 / (c + self.direction * delta) for c in (a, b))
                out += (ta - tb) / (2 * math.pi)
        return float(out)


def find_poles(model, cfg=DEFAULT_CONFIG):
    """Real solutions of ``E - M - Re Sigma(E) = 0`` outside the continuum.

    In every gap of the support the inverse propagator is strictly
    increasing, so each gap holds at most one root.  Roots are bracketed in
    edge coordinates ``E = edge +/- delta`` with ``log(delta)`` bisection, so
    poles exponentially close to a log-divergent edge are still found; those
    not representable as a float distinct from the edge are flagged
    ``at_edge``.
    """
    if model.memoryless:
        return []
    supports = _merged_supports(model)
    if not supports:
        return [Pole(model.M, 1.0)]
    tabulated = any(isinstance(ch.form_factor, Tabulated) for ch in model.channels)
    live = [ch for ch in model.channels if ch.g2 > 0]

    def side(edge, direction):
        # returns g(log delta) (positive on the far side of the root), the
        # slope of Re Sigma, the smallest log delta searched and the edge ulp
        if not tabulated:
            fr = _EdgeFrame(model, edge, direction)
            return (lambda lnd: direction * float(fr.D(lnd)[0])), fr.slope, LOG_DELTA_MIN, fr.ulp

        def g(lnd):
            delta = direction * math.exp(lnd)
            re = sum(ch.real_self_energy(np.array([edge]), shift=delta, cfg=cfg)[0] for ch in live)
            return direction * ((edge - model.M + delta) - re)

        def slope(lnd):
            return sum(ch.self_energy_slope(edge, direction * math.exp(lnd), cfg) for ch in live)

        ulp = float(np.spacing(abs(edge))) if edge != 0 else np.finfo(float).tiny
        return g, slope, math.log(16 * ulp), ulp

    span = max(hi for _, hi in supports) - min(lo for lo, _ in supports)
    far = 10.0 * (span + abs(model.M) + 1.0)
    gaps = [(-math.inf, supports[0][0])]
    gaps += [(supports[k][1], supports[k + 1][0]) for k in range(len(supports) - 1)]
    gaps.append((supports[-1][1], math.inf))

    poles = []
    for left, right in gaps:
        pole = _root_in_gap(side, left, right, far)
        if pole is not None:
            poles.append(pole)
    return poles


def _root_in_gap(side, left, right, far):
    # each side is searched in its own edge coordinate; delta > 0 points into the gap
    if math.isfinite(left) and math.isfinite(right):
        mid_gap = 0.5 * (right - left)
        sides = [(left, +1, mid_gap), (right, -1, mid_gap)]
    elif math.isfinite(right):
        sides = [(right, -1, math.inf)]
    else:
        sides = [(left, +1, math.inf)]

    for edge, direction, max_delta in sides:
        g, slope, lnd_min, ulp = side(edge, direction)
        near = g(lnd_min)
        if math.isfinite(max_delta):
            far_logd = math.log(max_delta)
            far_val = g(far_logd)
        else:
            far_logd = math.log(far)
            far_val = g(far_logd)
            while far_val < 0 and far_logd < 700:
                far_logd += 1.0
                far_val = g(far_logd)
        if near == 0:
            root = lnd_min
        elif np.sign(near) == np.sign(far_val) or np.isnan(far_val):
            continue
        else:
            root = find_root_bisect(g, lnd_min, far_logd, tol=1e-13)
        delta = direction * math.exp(root)
        weight = 1.0 / (1.0 - slope(root))
        if not weight > 0:
            return None  # root so close to the edge that its weight underflows
        energy = edge + delta
        at_edge = abs(delta) < 4 * ulp or delta == 0
        return Pole(energy=float(energy), weight=float(weight), offset=float(delta),
                    at_edge=bool(at_edge))
    return None


def normalization(model, cfg=DEFAULT_CONFIG):
    """Continuum integral plus bound-state weights (should be 1)."""
    return lee_spectral_function(model, cfg).total_weight(cfg)


def lee_spectral_function(model, cfg=DEFAULT_CONFIG):
    """Assemble the :class:`SpectralFunction` of ``model``.

    Memoryless channels make the support unbounded; the density is then
    integrated on ``M +/- L`` and continued with the Lorentzian expansion of
    the memoryless part (exact for pure Breit-Wigner models).

    For window form factors, structure that GK nodes rounded to the float
    grid cannot sample accurately is integrated in local coordinates
    instead: continuum weight squeezed against a support edge (see
    :func:`_edge_layers`) and narrow resonances (see
    :func:`_narrow_resonances`).
    """
    knots = sorted({k for ch in model.channels for k in ch.energy_knots()})
    gamma_flat = sum(ch.g2 for ch in model.channels if ch.memoryless)

    def density(E):
        return spectral_density(model, E, cfg)

    if gamma_flat > 0:
        extent = max([abs(k - model.M) for k in knots] + [0.0])
        L = max(400.0 * gamma_flat, 4.0 * extent + 10.0 * gamma_flat)
        window = (model.M - L, model.M + L)
        tails = lorentzian_tails(model.M, gamma_flat, L)
        return SpectralFunction(density, window, breakpoints=tuple(knots), tails=tails,
                                support=(-math.inf, math.inf), label="lee")
    supports = _merged_supports(model)
    poles = list(find_poles(model, cfg))
    if not supports:
        # fully decoupled: a single discrete level, represented by a dummy window
        return SpectralFunction(lambda E: np.zeros_like(E), (model.M - 1.0, model.M + 1.0),
                                poles=tuple(poles), label="lee")
    window = (supports[0][0], supports[-1][1])
    points = set(knots)
    removed, extra = [], []
    if not any(isinstance(ch.form_factor, Tabulated) for ch in model.channels):
        layers = _edge_layers(model, supports, cfg)
        for piece in layers + _narrow_resonances(model, supports, knots, cfg, [p.removed for p in layers]):
            points.update(piece.points)
            removed.append(piece.removed)
            points.update(piece.removed)
            poles += [p for p in piece.poles if p.weight > 0]
            if piece.nodes is not None:
                extra.append(piece.nodes)
    if removed:
        base = density

        def density(E):
            E = np.asarray(E, dtype=float)
            out = base(E)
            for lo, hi in removed:
                out = np.where((E >= lo) & (E <= hi), 0.0, out)
            return out

    points = sorted(p for p in points if window[0] <= p <= window[1])
    return SpectralFunction(density, window, breakpoints=tuple(points), poles=tuple(poles),
                            support=window, label="lee", extra=tuple(extra))


@dataclass
class _Piece:
    """Part of the continuum taken off the energy axis.

    ``removed`` is the closed interval where the axis density is set to
    zero; its weight is carried by ``poles`` (lumped terms) and/or
    ``nodes`` (``(E, weights, values)`` from a local-coordinate rule).
    ``points`` are breakpoints for the rule outside.
    """

    removed: tuple
    poles: list = field(default_factory=list)
    nodes: tuple = None
    points: list = field(default_factory=list)


# below this distance from an edge, densities of order 1/delta overflow
_FLOOR = 1e-280


def _edge_layers(model, supports, cfg):
    """Continuum weight squeezed against a log-divergent support edge.

    With the level near an edge and weak coupling, the density near the
    edge peaks at distances like ``exp(-1/g**2)``, below any panel the
    adaptive rule would try or below the float spacing at the edge.  Such
    layers are found by a scan of ``delta * d_S`` in ``log(delta)``.  Up
    to ``cut`` (1e8 float spacings at the edge, at most 1e-6 of the
    support) the layer is integrated in :class:`_EdgeFrame` coordinates:
    below 1e-280 into a pole at the edge, above it into rule nodes.
    Breakpoints are added from ``cut`` outwards.
    """
    out = []
    ln10 = math.log(10.0)
    for lo, hi in supports:
        deep = 1e-6 * (hi - lo)
        for edge, direction in ((lo, +1), (hi, -1)):
            fr = _EdgeFrame(model, edge, direction)
            u = np.linspace(LOG_DELTA_MIN, math.log(deep), 2001)
            y = fr.log_weight(u)
            k = int(np.argmax(y))
            if k == u.size - 1 or not y[k] > 0:
                continue  # nothing below the scales the rule resolves by itself
            cut = min(deep, max(1e8 * fr.ulp, _FLOOR))
            lnfloor, lncut = math.log(_FLOOR), math.log(cut)
            un, wn, yn, lines = _frame_rule(fr, LOG_DELTA_MIN, lncut, [lnfloor, u[k] - 5, u[k], u[k] + 5],
                                     _frame_resonances(fr, u[u <= lncut + 1.0]), cfg)
            below = un < lnfloor
            poles = [Pole(energy=edge, weight=float(np.dot(wn[below], yn[below])),
                          offset=direction * _FLOOR, at_edge=True)] + lines
            nodes = None
            if np.any(~below):
                delta = np.exp(un[~below])
                nodes = (edge + direction * delta, wn[~below] * delta, yn[~below] / delta)
            start = max(lncut, u[k] - 8 * ln10)
            pts = [edge + direction * math.exp(v) for v in np.arange(start, math.log(0.5 * (hi - lo)), ln10)]
            removed = (min(edge, edge + direction * cut), max(edge, edge + direction * cut))
            out.append(_Piece(removed, poles, nodes, pts))
    return out


def _frame_resonances(fr, u):
    # roots of D inside the support near an edge as (u_r, dx_r, omega): the
    # root is u_r + dx_r, refined below the float spacing of u_r, and omega
    # is the half width in log(delta), |Im Sigma| / |dD/dE| / delta
    with np.errstate(invalid="ignore"):
        s = np.sign(fr.D(u))
    out = []
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        ur = find_root_bisect(lambda v: float(fr.D(v)[0]), u[i], u[i + 1], tol=0.0)
        step = 2 * float(np.spacing(abs(ur)))
        dxr = 0.0
        if np.sign(fr.D(ur, -step)[0]) * np.sign(fr.D(ur, step)[0]) < 0:
            dxr = find_root_bisect(lambda x: float(fr.D(ur, x)[0]), -step, step, tol=0.0, max_iter=2200)
        denom = abs(1.0 - fr.slope(ur + dxr))
        with np.errstate(over="ignore", divide="ignore"):
            omega = float(fr.gamma(ur, dxr)[0]) * fr.sigma / denom / math.exp(ur + dxr) if denom > 0 else math.inf
        out.append((ur, dxr, omega))
    return out


def _frame_rule(fr, a, b, points, resonances, cfg):
    """Rule for ``delta * d_S`` on ``[a, b]`` in ``log(delta)``, plus lumped lines.

    A resonance narrower than 1e-3 in ``log(delta)`` is masked out of the
    plain rule over a window of ``h`` about its root ``u_r + dx_r``.  Down
    to half widths of 1e-12 the window spans a thousand half widths and is
    integrated with ``dx = dx_r + omega tan(theta)``; narrower lines get a
    window of 1e-8, over which the inverse propagator is linear, and are
    lumped into a pole decaying at their half width.  The wings get
    breakpoints.  Returns ``(nodes, weights, values, poles)``.
    """
    windows, pts, poles = [], list(points), []
    for ur, dxr, omega in resonances:
        pts.append(ur)
        if not omega < 1e-3:
            continue
        h = min(1e3 * omega, 0.5) if omega >= 1e-12 else 1e-8
        windows.append((ur, dxr, omega, h))
        pts += [ur + dxr + sgn * h * 10.0 ** j for sgn in (-1, 1) for j in (0, 1, 2, 3)]

    def plain(v):
        y = fr.log_weight(v)
        for ur, dxr, _, h in windows:
            y = np.where(np.abs((v - ur) - dxr) <= h, 0.0, y)
        return y

    rule = adaptive_rule(plain, a, b, cfg, points=sorted(p for p in set(pts) if a < p < b))
    nodes, weights, values = [rule.nodes], [rule.weights], [rule.values]
    for ur, dxr, omega, h in windows:
        lo, hi = max(a - ur, dxr - h), min(b - ur, dxr + h)
        if not lo < hi:
            continue
        if omega < 1e-12:
            # linear D: weight (1 / (pi |D'|)) [atan] over eta = delta_r * (x - dx_r)
            D1 = abs(1.0 - fr.slope(ur + dxr))
            gam = float(fr.gamma(ur, dxr)[0])
            scale = D1 * math.exp(ur + dxr - fr.log_sigma) / gam  # |D'| delta_r / |Im Sigma|
            weight = (math.atan(scale * (hi - dxr)) - math.atan(scale * (lo - dxr))) / (math.pi * D1)
            delta = math.exp(ur + dxr)
            poles.append(Pole(energy=fr.edge + fr.direction * delta, weight=weight,
                              offset=fr.direction * delta, decay_rate=omega * delta))
            continue
        win = adaptive_rule(lambda th: fr.log_weight(ur, dxr + omega * np.tan(th)) * omega / np.cos(th) ** 2,
                            math.atan((lo - dxr) / omega), math.atan((hi - dxr) / omega), cfg, points=[0.0])
        jac = omega / np.cos(win.nodes) ** 2
        nodes.append(ur + (dxr + omega * np.tan(win.nodes)))
        weights.append(win.weights * jac)
        values.append(win.values / jac)
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(values), poles


def _narrow_resonances(model, supports, knots, cfg, taken=()):
    """Continuum resonances too narrow for the adaptive rule to find.

    Roots of ``E - M - Re Sigma(E)`` inside the support are bracketed on a
    grid refined towards the knots.  A resonance of half width ``rate = Z
    |Im Sigma|`` below a thousandth of its interval is integrated in the
    local coordinate ``x = E - E_r``, where ``log1p`` keeps ``Re Sigma``
    exact below the float spacing at ``E_r``, over ``|x| <= half``; the
    wings get breakpoints ``E_r +/- half * 10**k``.  A resonance within 16
    float spacings, or with a peak density near overflow, is lumped into
    one pole decaying at ``rate``.  Roots in
    the ``taken`` intervals (edge layers) are left to those.
    """
    live = [ch for ch in model.channels if ch.g2 > 0]

    def im(E):
        return sum(ch.imag_self_energy(E) for ch in live)

    def D(E):
        return (E - model.M) - sum(ch.real_self_energy(E, cfg=cfg) for ch in live)

    inner = sorted({k for k in knots if any(lo <= k <= hi for lo, hi in supports)})
    out = []
    for a, b in zip(inner[:-1], inner[1:]):
        w = b - a
        if not any(ch.f2_at_energy(0.5 * (a + b)) > 0 for ch in live):
            continue  # a gap between supports
        da, db = (np.geomspace(max(64 * float(np.spacing(abs(x))), 1e-300), 0.5 * w, 300) for x in (a, b))
        E = np.unique(np.concatenate([a + da, b - db, np.linspace(a, b, 401)]))
        E = E[(E > a) & (E < b)]
        with np.errstate(invalid="ignore"):
            s = np.sign(D(E))
        roots = [E[i] for i in np.flatnonzero(s == 0)]
        # roots near E = 0 may sit deep in the subnormal range: allow ~1100 halvings
        roots += [find_root_bisect(lambda e: float(D(np.array(e))), E[i], E[i + 1], tol=0.0, max_iter=2200)
                  for i in np.flatnonzero(s[:-1] * s[1:] < 0)]
        for Er in roots:
            if any(lo <= Er <= hi for lo, hi in taken):
                continue  # inside an edge layer, integrated there
            D1 = 1.0 - sum(ch.self_energy_slope(Er, 0.0, cfg) for ch in live)
            G = -float(im(Er))
            rate = G / abs(D1)
            if not rate < 1e-3 * w:
                continue  # broad enough for the rule
            ulp = float(np.spacing(abs(Er)))
            room = min(Er - a, b - Er)
            D0 = float(D(np.array(Er)))
            if rate <= 16 * ulp or rate < 1e-250:  # the second: peak density near overflow
                half = min(max(1e6 * rate, 64 * ulp), 0.5 * room)
                piece = _Piece((Er - half, Er + half), poles=[_lumped_resonance(D0, D1, G, Er, half, rate)])
            else:
                half = min(max(1e3 * rate, 1e8 * ulp), 1e-6 * w, 0.5 * room)
                piece = _Piece((Er - half, Er + half),
                               nodes=_local_resonance(live, D0, Er, half, rate, G, cfg))
            steps = half * 10.0 ** np.arange(1, 40)
            steps = steps[steps < min(1e-3 * w, 0.5 * room)]
            piece.points = [*(Er - steps), *(Er + steps)]
            out.append(piece)
    return out


def _lumped_resonance(D0, D1, G, Er, half, rate):
    # inside E_r +/- half, far below the curvature scale of Re Sigma, the
    # inverse propagator is linear: D = D0 + D1 x with x = E - E_r, so the
    # weight is an arctan difference and the centre is -D0 / D1
    if G > 0:
        weight = (math.atan((D0 + D1 * half) / G) - math.atan((D0 - D1 * half) / G)) / (math.pi * D1)
    else:
        weight = 1.0 / abs(D1)  # Im Sigma underflowed: a line of zero width
    return Pole(energy=float(Er - D0 / D1), weight=float(weight), decay_rate=float(rate))


def _local_resonance(live, D0, Er, half, rate, G, cfg):
    # D(E_r + x) = D0 + x - sum g2 / (2 pi) [log1p(x / a) - log1p(x / b)],
    # a, b the distances of E_r to the window ends
    ends = [(ch.g2, Er - ch.energy_support()[0], Er - ch.energy_support()[1]) for ch in live]

    def Dx(x):
        return D0 + x - sum(g2 * (np.log1p(x / a) - np.log1p(x / b)) for g2, a, b in ends) / (2 * math.pi)

    # x = rate tan(theta) flattens the Lorentzian
    def f(theta):
        x = rate * np.tan(theta)
        r = np.hypot(Dx(x), G)
        return (G / r) * (rate / r) / (math.pi * np.cos(theta) ** 2)

    lim = math.atan(half / rate)
    rule = adaptive_rule(f, -lim, lim, cfg, points=[0.0])
    x = rate * np.tan(rule.nodes)
    jac = rate / np.cos(rule.nodes) ** 2
    return (Er + x, rule.weights * jac, rule.values / jac)
