import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decaylab.evolution import survival_probability
from decaylab.lee import Channel, LeeModel, Window, find_poles
from decaylab.oracle import (DiscretizationError, _single_mode, channel_occupations,
                             comparison_window, discretize, evolve_exact)


def test_zero_coupling_is_diagonal():
    m = LeeModel(M=1.5, channels=(Channel(0.0, Window(0.0, 5.0)),))
    dm = discretize(m, 50, (-1.0, 6.0))
    # uncoupled modes are dropped, so the matrix is just the level
    assert dm.size == 1
    lam, _ = dm.eigensystem()
    np.testing.assert_array_equal(lam, [1.5])
    np.testing.assert_allclose(evolve_exact(dm, [0.0, 3.0]).p, 1.0, atol=1e-15)


def test_matrix_structure(fig1_model):
    dm = discretize(fig1_model, 70, (-1.0, 6.0))
    H = dm.matrix()
    np.testing.assert_array_equal(H, H.T)
    off = H - np.diag(np.diag(H))
    off[0, :] = off[:, 0] = 0
    assert not off.any()
    # window [0, 5] on a grid of 0.1 cells starting at -1 -> 50 coupled modes
    assert dm.omega.size == 50
    assert np.all((dm.omega > 0) & (dm.omega < 5))
    np.testing.assert_allclose(dm.couplings, 0.6 * math.sqrt(0.1 / (2 * math.pi)))


def test_single_mode_rabi():
    m = LeeModel(M=1.0, channels=(Channel(0.8, Window(1.0, 1.5)),))
    dm = discretize(m, 1, (1.0, 1.5))
    assert dm.size == 2
    kappa = 0.8 * math.sqrt(0.5 / (2 * math.pi))
    t = np.linspace(0, 30, 301)
    # independent two-level propagation with a 2x2 matrix exponential
    from scipy.linalg import expm
    H = np.array([[1.0, kappa], [kappa, 1.25]])
    ref = np.array([abs(expm(-1j * H * s)[0, 0]) ** 2 for s in t])
    np.testing.assert_allclose(evolve_exact(dm, t).p, ref, atol=1e-12)
    np.testing.assert_allclose(_single_mode(1.0, 1.25, kappa)(t), ref, atol=1e-12)


def test_initial_state(fig1_oracle):
    st_ = evolve_exact(fig1_oracle, [0.0])
    assert st_.a[0] == pytest.approx(1.0, abs=1e-12)
    occ = channel_occupations(fig1_oracle, [0.0])
    assert np.all(np.abs(occ.w) < 1e-24)


def test_unitarity(fig1_oracle):
    t = np.array([0.0, 1.0, 10.0, 50.0, 500.0])
    np.testing.assert_allclose(evolve_exact(fig1_oracle, t).norm(), 1.0, atol=1e-10)


@given(st.floats(0.0, 200.0))
def test_unitarity_property(t):
    m = LeeModel.window(M=1.0, g2=0.5)
    dm = discretize(m, 120, (-0.5, 5.5))
    assert evolve_exact(dm, t).norm()[0] == pytest.approx(1.0, abs=1e-10)


def test_occupations_sum_rule(fig2_oracle):
    o = fig2_oracle
    np.testing.assert_allclose(o.w.sum(axis=0) + o.p, 1.0, atol=1e-10)
    assert np.all((o.w >= 0) & (o.w <= 1))
    np.testing.assert_allclose(o.w[:, 0], 0.0, atol=1e-20)


def test_closed_channel_stays_empty():
    m = LeeModel(M=2.0, channels=(Channel.from_g2(0.36, Window(0.0, 5.0)),
                                  Channel.from_g2(0.0, Window(0.5, 5.0))))
    o = channel_occupations(discretize(m, 300, (-1.0, 6.0)), np.linspace(0, 10, 21))
    assert not o.w[1].any()
    assert o.w[0, -1] > 0.5


def test_range_must_cover_support(fig1_model):
    with pytest.raises(DiscretizationError):
        discretize(fig1_model, 100, (0.5, 6.0))
    with pytest.raises(DiscretizationError):
        discretize(fig1_model, 100, (-1.0, 4.0))
    with pytest.raises(DiscretizationError):
        discretize(LeeModel.breit_wigner(), 100, (-1.0, 6.0))
    with pytest.raises(DiscretizationError):
        discretize(fig1_model, 100, (6.0, -1.0))


def test_recurrence_window(fig1_oracle):
    rec = fig1_oracle.recurrence_time
    assert rec == pytest.approx(2 * math.pi * 4000 / 7)
    assert comparison_window(fig1_oracle, 10.0) == 10.0
    assert comparison_window(fig1_oracle, 1e5) == pytest.approx(rec / 5)


def test_fig1_against_continuum(fig1_oracle, fig1_spectral):
    t = np.linspace(0, 10, 401)
    dp = np.abs(evolve_exact(fig1_oracle, t).p - survival_probability(fig1_spectral, t))
    assert dp.max() < 1e-3


def test_convergence_in_mode_number(fig1_model, fig1_oracle):
    t = np.linspace(0, 10, 101)
    coarse = evolve_exact(discretize(fig1_model, 2000, (-1.0, 6.0)), t).p
    fine = evolve_exact(discretize(fig1_model, 4000, (-1.5, 6.5)), t).p
    assert np.max(np.abs(fine - coarse)) < 1e-3
    assert np.max(np.abs(fine - evolve_exact(fig1_oracle, t).p)) < 1e-3


def test_isolated_eigenvalue_is_the_pole():
    m = LeeModel.window(M=0.2, g2=1.0)
    dm = discretize(m, 2000, (-1.0, 6.0))
    lam, V = dm.eigensystem()
    below = lam < 0
    assert below.sum() == 1
    (pole,) = [p for p in find_poles(m) if p.energy < 0]
    assert lam[below][0] == pytest.approx(pole.energy, abs=2e-3)
    assert V[0, below][0] ** 2 == pytest.approx(pole.weight, abs=2e-3)


def test_fig1_spectrum_in_band(fig1_oracle):
    # the poles of this model hug the band edges with weight < 1e-13: no visible
    # isolated eigenvalue in the finite model either
    lam, V = fig1_oracle.eigensystem()
    out = (lam < -1e-3) | (lam > 5 + 1e-3)
    assert not out.any() or np.sum(V[0, out] ** 2) < 1e-10


def test_fig2_ratio_against_oracle(fig2_densities, fig2_oracle, fig2_grid):
    h = fig2_densities.h_channels
    ho = fig2_oracle.densities()
    floor = 1e-3 * np.abs(h[1]).max()
    sel = (np.abs(h[1]) > floor) & (fig2_grid > 0)
    assert sel.sum() > 1000
    r, ro = h[0, sel] / h[1, sel], ho[0, sel] / ho[1, sel]
    assert np.max(np.abs(r - ro) / np.abs(r)) < 0.02


def test_fig2_densities_against_oracle(fig2_densities, fig2_oracle):
    ho = fig2_oracle.densities()
    assert np.max(np.abs(fig2_densities.h_channels - ho)) < 1e-4
