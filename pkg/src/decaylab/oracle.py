"""Brute-force check of the continuum machinery on a finite Lee matrix.

Each channel's continuum is replaced by ``N`` modes at the midpoints of a
uniform k-grid; mode ``n`` couples to the discrete level with
``g f(k_n) sqrt(dk / 2 pi)``.  The resulting symmetric matrix is
diagonalized once, after which the state at any ``t`` is exact.  Modes with
``f(k_n) = 0`` never get populated, so only coupled modes enter the
eigenproblem.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg

from .lee import LeeModel


class DiscretizationError(ValueError):
    pass


@dataclass
class DiscretizedModel:
    """Finite realization of a Lee model.

    Row/column 0 is the discrete level; the rest are the coupled modes,
    labelled by ``channel`` with energies ``omega``.
    """

    M: float
    omega: np.ndarray
    couplings: np.ndarray
    channel: np.ndarray
    n_channels: int
    dk: float
    n_modes: int  # per channel, including uncoupled ones
    _eig: tuple = field(default=None, repr=False, compare=False)

    @property
    def size(self):
        return 1 + self.omega.size

    @property
    def recurrence_time(self):
        return 2 * math.pi / self.dk

    def matrix(self):
        H = np.zeros((self.size, self.size))
        H[0, 0] = self.M
        H[0, 1:] = self.couplings
        H[1:, 0] = self.couplings
        H[np.arange(1, self.size), np.arange(1, self.size)] = self.omega
        return H

    def eigensystem(self):
        if self._eig is None:
            self._eig = linalg.eigh(self.matrix())
        return self._eig


def discretize(model: LeeModel, n_modes=4000, k_range=(-1.0, 6.0)):
    """Midpoint discretization of every channel on ``k_range``.

    The range has to contain each form factor's support; constant form
    factors (unbounded support) cannot be discretized.
    """
    k_lo, k_hi = map(float, k_range)
    if not k_lo < k_hi:
        raise DiscretizationError("k range must be increasing")
    if n_modes < 1:
        raise DiscretizationError("need at least one mode per channel")
    dk = (k_hi - k_lo) / n_modes
    k = k_lo + (np.arange(n_modes) + 0.5) * dk
    omegas, coups, labels = [], [], []
    for i, ch in enumerate(model.channels):
        lo, hi = ch.form_factor.support()
        if lo < k_lo or hi > k_hi:
            raise DiscretizationError(
                f"k range [{k_lo}, {k_hi}] does not cover channel {i} support [{lo}, {hi}]")
        c = ch.coupling * ch.form_factor(k) * math.sqrt(dk / (2 * math.pi))
        keep = c != 0
        omegas.append(k[keep] + ch.alpha)
        coups.append(c[keep])
        labels.append(np.full(int(keep.sum()), i))
    return DiscretizedModel(M=float(model.M), omega=np.concatenate(omegas),
                            couplings=np.concatenate(coups), channel=np.concatenate(labels),
                            n_channels=len(model.channels), dk=dk, n_modes=n_modes)


def _single_mode(M, omega, coupling):
    """Two-level reference ``p(t)`` (Rabi formula), for tests."""
    delta = omega - M
    kappa = coupling
    Om = math.sqrt(delta ** 2 / 4 + kappa ** 2)
    return lambda t: 1 - (4 * kappa ** 2 / (delta ** 2 + 4 * kappa ** 2)) * np.sin(Om * t) ** 2


@dataclass
class ExactState:
    t: np.ndarray
    amplitudes: np.ndarray  # (n_t, size); column 0 is the discrete level

    @property
    def a(self):
        return self.amplitudes[:, 0]

    @property
    def p(self):
        return np.abs(self.amplitudes[:, 0]) ** 2

    def norm(self):
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)


def evolve_exact(dm: DiscretizedModel, t):
    """``exp(-i H t) |S>`` for each ``t`` from the eigendecomposition."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lam, V = dm.eigensystem()
    phase = np.exp(-1j * np.outer(t, lam)) * V[0][None, :]
    return ExactState(t=t, amplitudes=phase @ V.T)


@dataclass
class Occupations:
    t: np.ndarray
    w: np.ndarray  # (n_channels, n_t)
    p: np.ndarray

    def densities(self):
        """``h_i = dw_i / dt`` by central differences (second order at the ends)."""
        return np.gradient(self.w, self.t, axis=1, edge_order=2)


def channel_occupations(dm: DiscretizedModel, t):
    """Summed mode probabilities ``w_i(t)`` per channel."""
    st = evolve_exact(dm, t)
    prob = np.abs(st.amplitudes[:, 1:]) ** 2
    w = np.zeros((dm.n_channels, st.t.size))
    for i in range(dm.n_channels):
        w[i] = prob[:, dm.channel == i].sum(axis=1)
    return Occupations(t=st.t, w=w, p=st.p)


def comparison_window(dm: DiscretizedModel, t_max):
    """Largest usable time: the request capped at a fifth of the recurrence time."""
    return min(float(t_max), dm.recurrence_time / 5)
