"""One-loop resummed spectral functions for relativistic decays.

Two decay channels are provided: a scalar pair (``g S phi^2``, finite
without cutoff) and a fermion pair (``g S psibar psi``, which needs a
cutoff).  Conventions:

    scalar:   Im Pi(s) = (g**2 / 16 pi) sqrt(1 - 4 m**2 / s)
    fermion:  Im Pi(s) = (g**2 / 8 pi) s (1 - 4 m**2 / s)**1.5 F(s)

both zero below ``s = 4 m**2``.  The width at the nominal mass is
``Gamma = Im Pi(M**2) / M``.  The propagator is ``1 / (s - M0**2 + Pi(s))``
with ``Re Pi`` from a dispersion relation, once subtracted at ``s = M**2``
so that ``Re`` of the inverse propagator vanishes at the nominal mass:

    F(s)       = (1/pi) PV int ds' Im Pi(s') [1/(s' - s) - 1/s']
    dRe Pi(s)  = F(s) - F(M**2)
    d_S(E)     = (2E/pi) Im Pi / ((E**2 - M**2 + dRe Pi)**2 + Im Pi**2)

With this sign the inverse propagator is increasing below threshold and
``int d_S dE`` plus bound-state weights is exactly one.
"""

from dataclasses import dataclass
import functools
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .evolution import embedded_kernel_sources, kernel_densities
from .numerics import (
    DEFAULT_CONFIG,
    differentiate_central,
    find_root_bisect,
    integrate_adaptive,
    integrate_principal_value,
)
from .spectral import Pole, PowerTail, SpectralFunction

_INTERP = CubicSpline
_SMOOTH_DECADES = 60.0  # smooth cutoff: stop the support where exp(-x) < e**-60


# -- channels -------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarPair:
    """Decay into two scalars of mass ``mass`` with coupling ``coupling``."""

    mass: float
    coupling: float

    def __post_init__(self):
        if self.mass < 0 or self.coupling < 0:
            raise ValueError("mass and coupling must be non-negative")

    @property
    def threshold(self):
        return 4.0 * self.mass ** 2

    @property
    def prefactor(self):
        return self.coupling ** 2 / (16 * math.pi)

    @property
    def top(self):
        return math.inf

    hard = False

    def imag(self, s):
        s = np.asarray(s, dtype=float)
        open_ = s > self.threshold
        safe = np.where(open_, s, 1.0)
        return np.where(open_, self.prefactor * np.sqrt(np.clip(1 - self.threshold / safe, 0, None)), 0.0)


@dataclass(frozen=True)
class FermionPair:
    """Decay into a fermion pair; ``cutoff`` is mandatory.

    ``form="hard"`` multiplies ``Im Pi`` by ``theta(cutoff**2 - s)``;
    ``form="smooth"`` by ``exp(-(s - cutoff**2) / smooth_width)`` above the
    cutoff (``smooth_width`` in energy**2, default ``cutoff**2 / 10``).
    """

    mass: float
    coupling: float
    cutoff: float = None
    form: str = "hard"
    smooth_width: float = None

    def __post_init__(self):
        if self.cutoff is None or not math.isfinite(self.cutoff) or self.cutoff <= 0:
            raise ValueError("fermion pair needs a finite cutoff: without it the "
                             "spectral function is not normalizable")
        if self.form not in ("hard", "smooth"):
            raise ValueError(f"unknown cutoff form {self.form!r}")
        if self.mass < 0 or self.coupling < 0:
            raise ValueError("mass and coupling must be non-negative")
        if self.cutoff <= 2 * self.mass:
            raise ValueError("cutoff must lie above the pair threshold")
        if self.form == "smooth" and self.smooth_width is None:
            object.__setattr__(self, "smooth_width", self.cutoff ** 2 / 10)

    @property
    def threshold(self):
        return 4.0 * self.mass ** 2

    @property
    def prefactor(self):
        return self.coupling ** 2 / (8 * math.pi)

    @property
    def hard(self):
        return self.form == "hard"

    @property
    def top(self):
        L2 = self.cutoff ** 2
        return L2 if self.hard else L2 + _SMOOTH_DECADES * self.smooth_width

    def cutoff_factor(self, s):
        s = np.asarray(s, dtype=float)
        L2 = self.cutoff ** 2
        if self.hard:
            return np.where(s <= L2, 1.0, 0.0)
        return np.exp(-np.clip(s - L2, 0, None) / self.smooth_width)

    def imag_uncut(self, s):
        s = np.asarray(s, dtype=float)
        open_ = s > self.threshold
        safe = np.where(open_, s, 1.0)
        beta2 = np.clip(1 - self.threshold / safe, 0, None)
        return np.where(open_, self.prefactor * s * beta2 ** 1.5, 0.0)

    def imag(self, s):
        return self.imag_uncut(s) * self.cutoff_factor(s)


@dataclass(frozen=True)
class QftModel:
    """Resonance of nominal mass ``M`` decaying through ``channels``.

    ``E_cut`` is where the scalar continuum is continued by its analytic
    power-law tail (default ``200 M``, or further out if a fermion cutoff
    lies beyond).
    """

    M: float
    channels: tuple
    E_cut: float = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValueError("need at least one decay channel")
        for ch in self.channels:
            if ch.coupling > 0 and not self.M ** 2 > ch.threshold:
                raise ValueError(f"M={self.M} lies below the threshold 2m={2 * ch.mass}: "
                                 "channel closed")
            if isinstance(ch, FermionPair) and not ch.cutoff > self.M:
                raise ValueError("fermion cutoff must exceed M")
        if self.E_cut is None:
            tops = [math.sqrt(ch.top) for ch in self.channels if math.isfinite(ch.top)]
            object.__setattr__(self, "E_cut", max([200.0 * self.M] + [2.0 * t for t in tops]))
        if self.E_cut <= self.M:
            raise ValueError("E_cut must exceed M")

    # -- constructors with the width as input --
    @classmethod
    def scalar(cls, M=1.0, m=0.25, width=0.1, E_cut=None):
        g = coupling_for_width("scalar", M, m, width)
        return cls(M, (ScalarPair(m, g),), E_cut)

    @classmethod
    def fermion(cls, M=1.0, m=0.25, width=0.1, cutoff=10.0, form="hard", smooth_width=None):
        g = coupling_for_width("fermion", M, m, width, cutoff=cutoff, form=form,
                               smooth_width=smooth_width)
        return cls(M, (FermionPair(m, g, cutoff, form, smooth_width),))

    @classmethod
    def two_scalar(cls, M=1.0, masses=(0.1, 0.3), widths=(0.06, 0.04), E_cut=None):
        chans = tuple(ScalarPair(m, coupling_for_width("scalar", M, m, w))
                      for m, w in zip(masses, widths))
        return cls(M, chans, E_cut)

    @property
    def threshold(self):
        return min(ch.threshold for ch in self.channels if ch.coupling > 0)

    @property
    def top(self):
        """Upper end of the support in ``s`` (inf if any scalar channel)."""
        return max(ch.top for ch in self.channels if ch.coupling > 0)

    @property
    def bounded(self):
        return math.isfinite(self.top)

    def width(self):
        return float(imag_self_energy(self, self.M ** 2)) / self.M

    def channel_widths(self):
        return [float(ch.imag(self.M ** 2)) / self.M for ch in self.channels]


def coupling_for_width(kind, M, m, width, cutoff=None, form="hard", smooth_width=None):
    """Coupling ``g`` giving ``Im Pi(M**2) / M = width``."""
    s = M * M
    if not s > 4 * m * m:
        raise ValueError("channel closed at s = M**2")
    if kind == "scalar":
        unit = ScalarPair(m, 1.0).imag(s)
    elif kind == "fermion":
        unit = FermionPair(m, 1.0, cutoff, form, smooth_width).imag(s)
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    if not float(unit) > 0:
        raise ValueError("channel has no width at s = M**2 (cutoff below M?)")
    return math.sqrt(width * M / float(unit))


# -- self-energy ----------------------------------------------------------------

def channel_imag_self_energy(model, channel_index, s):
    return model.channels[channel_index].imag(s)


def imag_self_energy(model, s):
    s = np.asarray(s, dtype=float)
    return sum(ch.imag(s) for ch in model.channels)


def _tail_start(ch, s):
    return max(64.0 * max(ch.threshold, 1.0), 4.0 * abs(s))


def _u_tail(ch, s, S, cfg, power=1):
    # int_S^inf Im Pi(x) [s / (x (x - s))] dx (power=1) or Im Pi / (x - s)**2 (power=2),
    # on u = 1/x where the integrand is regular at u = 0
    if power == 1:
        def f(u):
            return ch.imag(1.0 / u) * s / (1 - s * u)
    else:
        def f(u):
            return ch.imag(1.0 / u) / (1 - s * u) ** 2
    return integrate_adaptive(f, 0.0, 1.0 / S, cfg)[0]


def channel_dispersion(ch, s, cfg=DEFAULT_CONFIG):
    """``F(s) = (1/pi) PV int Im Pi(x) [1/(x - s) - 1/x] dx`` for one channel.

    Direct quadrature (slow); :func:`real_self_energy` uses tables.
    """
    s = float(s)
    if ch.coupling == 0 or s == 0:
        return 0.0
    s0, top = ch.threshold, ch.top
    if not math.isfinite(top):
        S = _tail_start(ch, s)
    elif ch.hard:
        S = top
    else:
        S = max(2.0 * top, 2.0 * s)  # smooth cutoff: negligible weight beyond top
    pts = [ch.cutoff ** 2] if isinstance(ch, FermionPair) and ch.cutoff ** 2 < S else None

    def g(x):
        return ch.imag(x) * s / x

    def quotient(x):
        # g vanishes at threshold, so x == s == s0 contributes nothing
        diff = x - s
        return np.where(diff == 0, 0.0, g(x) / np.where(diff == 0, 1.0, diff))

    if s <= s0 or s > S:
        val = integrate_adaptive(quotient, s0, S, cfg, points=pts)[0]
    elif s == S:
        raise ValueError("dispersion integral diverges at the hard cutoff")
    else:
        val = integrate_principal_value(g, s, s0, S, cfg, points=pts)
    if not math.isfinite(top):
        val += _u_tail(ch, s, S, cfg)
    return val / math.pi


def _hard_remainder(ch, s, delta=None, cfg=DEFAULT_CONFIG):
    """``F(s) - (g_s(L2)/pi) ln|L2 - s|`` for a hard-cutoff channel, with
    ``g_s(x) = Im Pi(x) s / x``; regular at ``s = L2 = cutoff**2``.

    For ``delta`` given, ``s = L2 + delta`` (``delta > 0``) and the log is
    formed from ``delta`` itself, so ``s`` may sit within rounding of ``L2``.
    """
    s0, L2 = ch.threshold, ch.cutoff ** 2
    if delta is not None:
        s = L2 + delta
    gL = float(ch.imag_uncut(L2)) * s / L2

    def g(x):
        return ch.imag_uncut(x) * s / x

    if delta is not None or s >= L2:
        # outside the support: int (g(x) - gL) / (x - s) + gL ln|(L2 - s) / (s0 - s)|
        d = delta if delta is not None else s - L2
        val = integrate_adaptive(lambda x: (g(x) - gL) / (x - s), s0, L2, cfg)[0]
        val += gL * (math.log(d) - math.log(s - s0)) if d > 0 else -gL * math.log(s - s0)
        return val / math.pi, gL
    if s <= s0:
        def quotient(x):
            diff = x - s
            return np.where(diff == 0, 0.0, g(x) / np.where(diff == 0, 1.0, diff))
        val = integrate_adaptive(quotient, s0, L2, cfg)[0]
    else:
        val = integrate_principal_value(g, s, s0, L2, cfg)
    return val / math.pi - gL * math.log(L2 - s) / math.pi, gL


def _log_part(model, s):
    # singular pieces of F at hard cutoffs, removed before tabulation
    out = np.zeros(np.shape(s))
    for ch in model.channels:
        if isinstance(ch, FermionPair) and ch.hard and ch.coupling > 0:
            L2 = ch.cutoff ** 2
            gL = float(ch.imag_uncut(L2)) / L2
            with np.errstate(divide="ignore"):
                out = out + gL * s * np.log(np.abs(L2 - s)) / math.pi
    return out


def _smooth_part(model, s, cfg):
    """``F`` minus its hard-cutoff logs, by direct quadrature."""
    total = 0.0
    for ch in model.channels:
        if ch.coupling == 0:
            continue
        if isinstance(ch, FermionPair) and ch.hard:
            total += _hard_remainder(ch, s, cfg=cfg)[0]
        else:
            total += channel_dispersion(ch, s, cfg)
    return total


@dataclass
class DispersionTable:
    """Tabulated ``F(s)`` between the lowest threshold and ``s_max``.

    Segments end at every threshold (where ``F`` has a square-root cusp
    from below); in the last segment nodes are spaced logarithmically in
    ``s - s_start``.  Hard-cutoff logs are subtracted before interpolating.
    """

    bounds: np.ndarray
    splines: list
    mappings: list
    s_max: float
    F_M2: float = 0.0
    max_check_error: float = math.nan

    def smooth(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        seg = np.clip(np.searchsorted(self.bounds, s, side="right") - 1, 0, len(self.splines) - 1)
        for k, (spl, (kind, p, q, sigma)) in enumerate(zip(self.splines, self.mappings)):
            sel = seg == k
            if np.any(sel):
                out[sel] = spl(_map(kind, p, q, sigma, s[sel]))
        return out


def _map(kind, p, q, sigma, s):
    if kind == "log_up":
        return np.log(np.clip(s - p, 0, None) + sigma)
    if kind == "log_down":
        return -np.log(np.clip(q - s, 0, None) + sigma)
    # quadratic clustering towards q: s = q - (q - p)(1 - z)**2
    return 1.0 - np.sqrt(np.clip((q - s) / (q - p), 0, 1))


def _unmap(kind, p, q, sigma, y):
    if kind == "log_up":
        return p + np.exp(y) - sigma
    if kind == "log_down":
        return q - np.exp(-y) + sigma
    return q - (q - p) * (1 - y) ** 2


def _segments(model, s_lo, s_max):
    """Table segments as ``(p, q, kind)``.

    Thresholds give a square-root cusp from below (``quad`` clustering);
    a cutoff leaves a ``(s - L2) ln|s - L2|`` kink (after the log
    subtraction for hard cutoffs), resolved by log clustering from both
    sides.
    """
    thresholds = {ch.threshold for ch in model.channels if ch.coupling > 0}
    kinks = {ch.cutoff ** 2 for ch in model.channels
             if isinstance(ch, FermionPair) and not ch.hard and ch.coupling > 0}
    hard_tops = {ch.cutoff ** 2 for ch in model.channels
                 if isinstance(ch, FermionPair) and ch.hard and ch.coupling > 0}
    inner = sorted(x for x in thresholds | kinks if s_lo < x < s_max)
    bounds = [s_lo] + inner + [s_max]
    out = []
    for p, q in zip(bounds[:-1], bounds[1:]):
        if q in thresholds and q != s_max:
            mid = p + 0.25 * (q - p)
            out.append((p, mid, "log_up"))
            out.append((mid, q, "quad"))
        elif q in kinks and q != s_max:
            mid = 0.5 * (p + q)
            out.append((p, mid, "log_up"))
            out.append((mid, q, "log_down"))
        elif q == s_max and q in hard_tops:
            mid = 0.5 * (p + q)
            out.append((p, mid, "log_up"))
            out.append((mid, q, "log_down"))
        else:
            out.append((p, q, "log_up"))
    return out


@functools.lru_cache(maxsize=32)
def dispersion_table(model, cfg=DEFAULT_CONFIG, points_per_decade=30, segment_points=100):
    """Build (and cache) the :class:`DispersionTable` of ``model``."""
    s_lo = model.threshold
    s_max = model.top if model.bounded else model.E_cut ** 2
    splines, mappings, starts = [], [], []
    for p, q, kind in _segments(model, s_lo, s_max):
        if kind == "quad":
            y = np.linspace(0.0, 1.0, segment_points + 1)
            mapping = ("quad", p, q, 0.0)
        else:
            sigma = 1e-7 * max(p if kind == "log_up" else q, model.M ** 2)
            y0, y1 = math.log(sigma), math.log(q - p + sigma)
            n = max(40, int(points_per_decade * (y1 - y0) / math.log(10)))
            y = np.linspace(y0, y1, n + 1)
            if kind == "log_down":
                y = -y[::-1]
            mapping = (kind, p, q, sigma)
            # log spacing alone is coarse far from the clustering end
            extra = _map(kind, p, q, sigma, np.linspace(p, q, segment_points + 1)[1:-1])
            y = np.unique(np.concatenate([y, extra]))
        s = _unmap(*mapping, y)
        s[0], s[-1] = p, q
        vals = np.array([_smooth_part(model, x, cfg) for x in s])
        splines.append(_INTERP(y, vals))
        mappings.append(mapping)
        starts.append(p)
    table = DispersionTable(np.asarray(starts), splines, mappings, s_max)
    table.F_M2 = float(table.smooth(np.array([model.M ** 2]))[0] + _log_part(model, model.M ** 2))
    return table


def dispersion(model, s, cfg=DEFAULT_CONFIG):
    """``F(s)`` summed over channels; tabulated inside the table range."""
    s = np.asarray(s, dtype=float)
    shape = s.shape
    s = s.ravel()
    table = dispersion_table(model, cfg)
    out = np.empty(s.shape)
    inside = (s >= model.threshold) & (s <= table.s_max)
    if np.any(inside):
        out[inside] = table.smooth(s[inside]) + _log_part(model, s[inside])
    for idx in np.nonzero(~inside)[0]:
        x = float(s[idx])
        out[idx] = sum(channel_dispersion(ch, x, cfg) if not (isinstance(ch, FermionPair) and ch.hard)
                       else _hard_full(ch, x, cfg) for ch in model.channels if ch.coupling > 0)
    return out.reshape(shape)


def _hard_full(ch, s, cfg):
    L2 = ch.cutoff ** 2
    if s > L2:
        return _hard_remainder(ch, s, delta=s - L2, cfg=cfg)[0]
    return channel_dispersion(ch, s, cfg)


def real_self_energy(model, s, cfg=DEFAULT_CONFIG):
    """Subtracted real part ``dRe Pi(s) = F(s) - F(M**2)`` (zero at ``s = M**2``)."""
    s = np.asarray(s, dtype=float)
    out = dispersion(model, s, cfg) - dispersion_table(model, cfg).F_M2
    return out if out.ndim else float(out)


def scalar_dispersion_closed_form(ch, s):
    """Closed form of ``F(s)`` for a scalar channel (reference values)."""
    s = np.asarray(s, dtype=float)
    c = ch.prefactor / math.pi
    s0 = ch.threshold
    out = np.empty(s.shape)
    neg = s < 0
    mid = (s > 0) & (s < s0)
    above = s > s0
    zero = s == 0
    if np.any(neg):
        b = np.sqrt(1 - s0 / s[neg])
        out[neg] = c * (2 + b * np.log((b - 1) / (b + 1)))
    if np.any(mid):
        b = np.sqrt(s0 / s[mid] - 1)
        out[mid] = c * (2 - 2 * b * np.arctan(1 / b))
    if np.any(above):
        b = np.sqrt(1 - s0 / s[above])
        out[above] = c * (2 + b * np.log((1 - b) / (1 + b)))
    out[zero] = 0.0
    out[s == s0] = 2 * c
    return out


# -- spectral function ----------------------------------------------------------

def qft_spectral_density(model, E, cfg=DEFAULT_CONFIG):
    """``d_S(E)``; zero below threshold (and above a hard cutoff)."""
    E = np.asarray(E, dtype=float)
    out = np.zeros(E.shape)
    s = E * E
    ok = (E > 0) & (s > model.threshold) & (s < model.top)
    if np.any(ok):
        ss, EE = s[ok], E[ok]
        im = imag_self_energy(model, ss)
        D = ss - model.M ** 2 + real_self_energy(model, ss, cfg)
        with np.errstate(over="ignore", invalid="ignore"):
            out[ok] = np.where(np.isfinite(D), 2 * EE / math.pi * im / (D * D + im * im), 0.0)
    return out if out.ndim else float(out)


def _inverse_propagator(model, s, cfg):
    return s - model.M ** 2 + float(real_self_energy(model, np.array([s]), cfg)[0])


def _F_slope(ch, s, cfg):
    # dF/ds outside the support: (1/pi) int Im Pi / (x - s)**2
    S = ch.top if math.isfinite(ch.top) else _tail_start(ch, s)
    val = integrate_adaptive(lambda x: ch.imag(x) / (x - s) ** 2, ch.threshold, S, cfg)[0]
    if not math.isfinite(ch.top):
        val += _u_tail(ch, s, S, cfg, power=2)
    return val / math.pi


def find_qft_poles(model, cfg=DEFAULT_CONFIG):
    """Bound states below threshold and (hard cutoffs only) above the support.

    The inverse propagator ``s - M**2 + dRe Pi(s)`` increases in both gaps,
    so each holds at most one root.  Above a hard cutoff the log divergence
    of ``Re Pi`` always produces one, exponentially close to the cutoff and
    with negligible weight; it is located in edge coordinates and flagged
    ``at_edge`` when it cannot be separated from the cutoff in floating point.
    Roots with ``s < 0`` are not physical states and are not searched.
    """
    poles = []
    s0 = model.threshold
    F_M2 = dispersion_table(model, cfg).F_M2
    live = [ch for ch in model.channels if ch.coupling > 0]

    def D_below(s):
        return s - model.M ** 2 + sum(channel_dispersion(ch, s, cfg) for ch in live) - F_M2

    if D_below(0.0) < 0 < D_below(s0):
        sp = find_root_bisect(D_below, 0.0, s0, tol=1e-14 * s0)
        slope = 1.0 + sum(_F_slope(ch, sp, cfg) for ch in live)
        poles.append(Pole(energy=math.sqrt(sp), weight=1.0 / slope, offset=math.sqrt(sp) - math.sqrt(s0)))

    if model.bounded and all(isinstance(ch, FermionPair) and ch.hard for ch in live):
        top = model.top

        def D_above(logd):
            d = math.exp(logd)
            total = top + d - model.M ** 2 - F_M2
            for ch in live:
                L2 = ch.cutoff ** 2
                total += _hard_remainder(ch, None, delta=(top - L2) + d, cfg=cfg)[0]
            return total

        lo, hi = math.log(1e-300), math.log(top)
        while D_above(hi) < 0 and hi < 700:
            hi += 1.0
        if D_above(lo) < 0 < D_above(hi):
            root = find_root_bisect(D_above, lo, hi, tol=1e-12)
            d = math.exp(root)
            # dD/ds = (dD/dlog d) / d
            slope = differentiate_central(D_above, root, step=1e-3) / d
            sp = top + d
            at_edge = d < 4 * np.spacing(top)
            poles.append(Pole(energy=math.sqrt(sp), weight=1.0 / slope,
                              offset=math.sqrt(sp) - math.sqrt(top), at_edge=bool(at_edge)))
    return poles


def _scalar_tail(model, cfg):
    scal = [ch for ch in model.channels if isinstance(ch, ScalarPair) and ch.coupling > 0]
    if not scal:
        return ()
    L = model.E_cut
    a3 = 2.0 / math.pi * sum(ch.prefactor for ch in scal)
    dL = qft_spectral_density(model, np.array([L * (1 - 1e-12)]), cfg)[0]
    a5 = (dL - a3 / L ** 3) * L ** 5
    return (PowerTail(+1, 0.0, L, ((a3, 3), (a5, 5))),)


def qft_spectral_function(model, cfg=DEFAULT_CONFIG):
    """:class:`SpectralFunction` of a QFT model (continuum, poles, tail)."""
    E_lo = math.sqrt(model.threshold)
    E_hi = math.sqrt(model.top) if model.bounded else model.E_cut
    knots = {math.sqrt(ch.threshold) for ch in model.channels if ch.coupling > 0}
    knots.add(model.M)
    for ch in model.channels:
        if isinstance(ch, FermionPair):
            knots.add(ch.cutoff)
    knots = tuple(sorted(k for k in knots if E_lo < k < E_hi))

    def density(E):
        return qft_spectral_density(model, E, cfg)

    return SpectralFunction(density, (E_lo, E_hi), breakpoints=knots,
                            poles=tuple(find_qft_poles(model, cfg)),
                            tails=_scalar_tail(model, cfg),
                            support=(E_lo, E_hi if model.bounded else math.inf), label="qft")


def qft_normalization(model, cfg=DEFAULT_CONFIG):
    return qft_spectral_function(model, cfg).total_weight(cfg)


# -- per-channel decay densities ----------------------------------------------------

def branching_fractions(model):
    """Callables ``E -> Im Pi_i(E**2) / Im Pi(E**2)`` (zero where all vanish)."""
    def make(i):
        ch = model.channels[i]

        def frac(E):
            s = np.asarray(E, dtype=float) ** 2
            tot = imag_self_energy(model, s)
            return np.where(tot > 0, ch.imag(s) / np.where(tot > 0, tot, 1.0), 0.0)
        return frac
    return [make(i) for i in range(len(model.channels))]


def _asymptotic_fractions(model):
    scal = [ch.prefactor if isinstance(ch, ScalarPair) else 0.0 for ch in model.channels]
    total = sum(scal)
    return [c / total for c in scal] if total > 0 else None


def qft_partial_densities(model, t, cfg=DEFAULT_CONFIG, step=None, conv_tol=1e-5):
    """Per-channel decay densities of a QFT model on a uniform grid.

    ``d_S`` is embedded into the single-level Lee model that has it as its
    spectral function (``|Im Sigma| = pi d_S / |G|**2``) and the channel
    memory kernels follow from the branching fractions ``Im Pi_i / Im Pi``.
    The scalar kernel is log-singular at ``tau = 0``; the product-integration
    convolution handles that without special casing.
    """
    t = np.asarray(t, dtype=float)
    spectral = qft_spectral_function(model, cfg)
    t_max = float(t[-1])
    if step is None:
        E_hi = spectral.window[1]
        step = min(0.02, math.pi / (E_hi - spectral.window[0]), 1.0 / (10 * model.width()))
    sources = embedded_kernel_sources(spectral, branching_fractions(model), t_max, cfg,
                                      tail_branchings=_asymptotic_fractions(model),
                                      center=model.M)
    return kernel_densities(spectral, sources, t, cfg, step=step, center=model.M,
                            conv_tol=conv_tol)
