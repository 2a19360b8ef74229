import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from decaylab.qft import (
    FermionPair,
    QftModel,
    ScalarPair,
    find_qft_poles,
    imag_self_energy,
    qft_normalization,
    qft_partial_densities,
    qft_spectral_density,
    qft_spectral_function,
    real_self_energy,
    scalar_dispersion_closed_form,
)

# -- imaginary part: independent two-body calculation -------------------------------

def _two_body_phase_space(s, m):
    """``int dPhi_2`` for two equal masses, by integrating the delta function.

    ``int d^3p / ((2 pi)^3 (2E)^2) 2 pi delta(sqrt(s) - 2E)`` reduces to
    ``(1/4 pi) p**2 / E**2 / |d(2E)/dp|`` at the on-shell momentum.
    """
    E = math.sqrt(s) / 2
    p = math.sqrt(E * E - m * m)
    return (1 / (4 * math.pi)) * p * p / (E * E) / (2 * p / E)


def _dirac_trace(s, m):
    """Spin sum ``Tr[(p1/ + m)(p2/ - m)]`` from explicit Dirac matrices."""
    I2 = np.eye(2)
    sig = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]
    g0 = np.block([[I2, 0 * I2], [0 * I2, -I2]])
    gs = [np.block([[0 * I2, si], [-si, 0 * I2]]) for si in sig]
    E = math.sqrt(s) / 2
    p = math.sqrt(E * E - m * m)
    slash = lambda E_, px: E_ * g0 - px * gs[0]
    return np.trace((slash(E, p) + m * np.eye(4)) @ (slash(E, -p) - m * np.eye(4))).real


@pytest.mark.parametrize("s", [0.3, 1.0, 7.5])
def test_scalar_imag_part_from_phase_space(s):
    ch = ScalarPair(0.25, 1.3)
    # 1/2 for identical final-state particles
    ref = 0.5 * ch.coupling ** 2 * _two_body_phase_space(s, 0.25)
    assert ch.imag(np.array([s]))[0] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("s", [0.3, 1.0, 7.5])
def test_fermion_imag_part_from_dirac_trace(s):
    ch = FermionPair(0.25, 0.9, cutoff=10.0)
    ref = 0.5 * ch.coupling ** 2 * _dirac_trace(s, 0.25) * _two_body_phase_space(s, 0.25)
    assert ch.imag(np.array([s]))[0] == pytest.approx(ref, rel=1e-12)


def test_imag_part_zero_outside_support():
    sc = ScalarPair(0.25, 1.0)
    fe = FermionPair(0.25, 1.0, cutoff=3.0)
    assert sc.imag(np.array([0.2]))[0] == 0.0
    assert fe.imag(np.array([0.2, 9.5]))[0] == 0.0
    assert fe.imag(np.array([9.5]))[0] == 0.0


def test_width_is_imag_part_over_mass():
    m = QftModel.scalar(width=0.1)
    assert m.width() == pytest.approx(0.1, rel=1e-12)
    two = QftModel.two_scalar()
    assert two.channel_widths() == pytest.approx([0.06, 0.04], rel=1e-12)
    assert float(imag_self_energy(two, 1.0)) == pytest.approx(0.1, rel=1e-12)


def test_construction_rules():
    with pytest.raises((TypeError, ValueError)):
        FermionPair(0.25, 1.0)
    with pytest.raises((TypeError, ValueError)):
        QftModel.fermion(cutoff=None)
    with pytest.raises(ValueError):
        QftModel(0.4, (ScalarPair(0.25, 1.0),))  # below threshold
    with pytest.raises(ValueError):
        QftModel.fermion(cutoff=0.8)


# -- dispersion ----------------------------------------------------------------

def _F_oracle(ch, s, top=np.inf):
    """``(1/pi) PV int Im Pi(x) s / (x (x - s)) dx`` with scipy's QAWC."""
    f = lambda x: ch.imag(np.array([x]))[0] * s / x
    s0 = ch.threshold
    X = min(top, 400.0)
    if s0 < s < X:
        val = integrate.quad(f, s0, X, weight="cauchy", wvar=s, epsabs=1e-13, limit=500)[0]
    else:
        val = integrate.quad(lambda x: f(x) / (x - s), s0, X, epsabs=1e-13, limit=500)[0]
    if X < top:
        val += integrate.quad(lambda x: f(x) / (x - s), X, np.inf, epsabs=1e-13, limit=500)[0]
    return val / math.pi


def test_scalar_dispersion_closed_form_matches_oracle():
    ch = ScalarPair(0.25, 1.0)
    for s in (-2.0, 0.1, 0.5, 2.0, 30.0):
        assert scalar_dispersion_closed_form(ch, s) == pytest.approx(_F_oracle(ch, s), abs=1e-9)


def test_scalar_table_matches_closed_form():
    model = QftModel.scalar()
    ch = model.channels[0]
    s = np.concatenate([np.linspace(0.01, 0.2499, 30), np.linspace(0.2501, 3, 60),
                        np.geomspace(3, 3e4, 60)])
    ref = scalar_dispersion_closed_form(ch, s) - scalar_dispersion_closed_form(ch, 1.0)
    err = np.abs(real_self_energy(model, s) - ref)
    assert np.max(err / np.maximum(1.0, np.abs(ref))) < 1e-6


def test_fermion_table_matches_oracle():
    model = QftModel.fermion(cutoff=10.0)
    ch = model.channels[0]
    F_M2 = _F_oracle(ch, 1.0, top=100.0)
    for s in (0.1, 0.4, 2.0, 50.0, 99.0):
        ref = _F_oracle(ch, s, top=100.0) - F_M2
        assert float(real_self_energy(model, s)) == pytest.approx(ref, rel=1e-6, abs=1e-8)


def test_subtraction_point():
    for model in (QftModel.scalar(), QftModel.fermion(cutoff=10.0)):
        assert abs(real_self_energy(model, 1.0)) < 1e-12


# -- spectral function -------------------------------------------------------------

@pytest.mark.parametrize("model", [
    QftModel.scalar(),
    QftModel.fermion(cutoff=10.0),
    QftModel.fermion(cutoff=20.0),
    QftModel.fermion(cutoff=10.0, form="smooth", smooth_width=1.0),
    QftModel.two_scalar(),
], ids=["scalar", "fermion10", "fermion20", "fermion-smooth", "two-scalar"])
def test_normalization(model):
    assert abs(qft_normalization(model) - 1.0) < 1e-4


def test_density_vanishes_below_threshold():
    model = QftModel.scalar()
    assert np.all(qft_spectral_density(model, np.linspace(0, 0.4999, 20)) == 0.0)


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=25))
def test_density_nonnegative(E):
    for model in (QftModel.scalar(), QftModel.fermion(cutoff=10.0)):
        assert np.all(qft_spectral_density(model, np.array(E)) >= 0)


def test_peak_near_mass():
    model = QftModel.scalar()
    E = np.linspace(0.8, 1.2, 4001)
    d = qft_spectral_density(model, E)
    assert abs(E[np.argmax(d)] - 1.0) < 0.01


def test_hard_cutoff_pole_negligible():
    poles = find_qft_poles(QftModel.fermion(cutoff=10.0))
    assert all(p.weight < 1e-6 for p in poles)
    assert all(p.energy > 10.0 for p in poles)


def test_tail_slopes():
    sc = QftModel.scalar()
    E = np.geomspace(10, 100, 30)
    slope = np.polyfit(np.log(E), np.log(qft_spectral_density(sc, E)), 1)[0]
    assert abs(slope + 3) < 0.05


# -- per-channel densities ----------------------------------------------------

def test_two_scalar_ratio_fluctuates_about_width_ratio():
    model = QftModel.two_scalar(E_cut=50.0)
    t = np.linspace(0, 40, 401)
    cd = qft_partial_densities(model, t, step=0.01)
    assert cd.sum_rule_residual() < 1e-3
    r = cd.ratio[t >= 5]
    assert np.nanmin(r) < 1.5 < np.nanmax(r)
    assert abs(np.nanmean(r) / 1.5 - 1) < 0.1


def test_equal_channels_ratio_one():
    ch = ScalarPair(0.25, QftModel.scalar(width=0.05).channels[0].coupling)
    model = QftModel(1.0, (ch, ch), E_cut=50.0)
    t = np.linspace(0, 10, 101)
    cd = qft_partial_densities(model, t, step=0.01)
    r = cd.ratio
    assert np.nanmax(np.abs(r[1:] - 1)) < 1e-9


def test_closed_second_channel_carries_nothing():
    g = QftModel.scalar().channels[0].coupling
    model = QftModel(1.0, (ScalarPair(0.25, g), ScalarPair(0.3, 0.0)), E_cut=50.0)
    t = np.linspace(0, 10, 101)
    cd = qft_partial_densities(model, t, step=0.01)
    assert np.max(np.abs(cd.h_channels[1])) == 0.0
    assert np.max(np.abs(cd.h_channels[0] - cd.h)) < 1e-3 * np.max(np.abs(cd.h))
    single = qft_spectral_function(QftModel(1.0, (ScalarPair(0.25, g),), E_cut=50.0))
    assert single.total_weight() == pytest.approx(1.0, abs=1e-4)
