import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decaylab.evolution import (
    ChannelDensities,
    ConvolutionError,
    bw_survival_probability,
    channel_kernel,
    decay_density,
    density_ratio,
    embedded_kernel_sources,
    energy_variance,
    kernel_densities,
    partial_decay_densities,
    quadratic_regime_duration,
    short_time_slope,
    survival_amplitude,
    survival_probability,
    survival_series,
    window_kernel_closed_form,
)
from decaylab.lee import Channel, LeeModel, Window, lee_spectral_function, two_window_model
from decaylab.spectral import DivergentMomentError


# -- survival ------------------------------------------------------------------

def test_initial_values(fig1_spectral):
    assert survival_amplitude(fig1_spectral, 0.0) == 1.0
    s = survival_series(fig1_spectral, np.linspace(0, 25, 501))
    assert s.p[0] == 1.0
    assert s.h[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.abs(s.a) <= 1 + 1e-9)


def test_bw_numeric_path():
    sp = lee_spectral_function(LeeModel.breit_wigner(M=2.0, widths=(0.36,)))
    t = np.linspace(0, 10 / 0.36, 400)
    p = survival_probability(sp, t)
    assert np.max(np.abs(p - bw_survival_probability(0.36, t))) < 1e-3
    with pytest.raises(DivergentMomentError):
        decay_density(sp, t)
    assert np.all(np.isnan(survival_series(sp, t).h))


def test_h_matches_difference_of_p(fig1_spectral):
    t = np.linspace(0, 25, 2501)
    s = survival_series(fig1_spectral, t)
    fd = -np.gradient(s.p, t, edge_order=2)
    assert np.max(np.abs(fd - s.h)) < 1e-4


def test_single_channel_h_nonnegative(fig1_spectral):
    h = decay_density(fig1_spectral, np.linspace(0, 24.5, 491))
    assert np.min(h) >= -1e-9


def test_late_negative_h_is_physical(fig1_model, fig1_spectral):
    """Edge interference makes h dip below zero just before t = 25.

    The finite-matrix evolution shows the same dip, so this is dynamics
    and not numerical error.
    """
    from decaylab.oracle import discretize, evolve_exact

    t = np.linspace(24.5, 25.5, 11)
    h = decay_density(fig1_spectral, t)
    assert h.min() < -1e-6
    dm = discretize(fig1_model, 4200, (-1.0, 6.0))  # window edges on cell boundaries
    tt = np.linspace(24.4, 25.6, 1201)
    ho = np.interp(t, tt, -np.gradient(evolve_exact(dm, tt).p, tt, edge_order=2))
    assert np.max(np.abs(h - ho)) < 1e-7


def test_window_tail_stays_above_exponential(fig1_spectral):
    # threshold power laws eventually beat exp(-G t); at t ~ 20-25 p is still below it
    t = np.array([60.0, 80.0, 100.0])
    assert np.all(survival_probability(fig1_spectral, t) > bw_survival_probability(0.36, t))


def test_interpolation_respects_bounds(fig1_spectral):
    s = survival_series(fig1_spectral, np.linspace(0, 25, 101))
    tt = np.linspace(0, 25, 997)
    a, p = s.interpolate(tt)
    assert np.all((p >= 0) & (p <= 1))
    assert np.max(np.abs(p - survival_probability(fig1_spectral, tt))) < 1e-4


def test_negative_time_rejected(fig1_spectral):
    with pytest.raises(ValueError):
        survival_amplitude(fig1_spectral, np.array([-1.0]))


# -- short-time regime -----------------------------------------------------------

def test_short_time_quadratic(fig1_spectral):
    assert abs(short_time_slope(fig1_spectral) - 2) < 0.05


@given(st.floats(0.5, 4.5), st.floats(0.05, 1.0))
def test_quadratic_coefficient_is_variance(M, g2):
    sp = lee_spectral_function(LeeModel.window(M=M, g2=g2))
    var = energy_variance(sp)
    t = 1e-3 / math.sqrt(var)
    q = 1 - survival_probability(sp, np.array([t]))[0]
    assert q == pytest.approx(var * t * t, rel=1e-3)


def test_quadratic_duration_requires_early_start(fig1_spectral):
    with pytest.raises(ValueError):
        quadratic_regime_duration(fig1_spectral, np.array([5.0, 6.0]))
    tz = quadratic_regime_duration(fig1_spectral, np.geomspace(1e-3, 20, 400))
    assert 0 < tz < 20


# -- kernels and per-channel densities --------------------------------------------

def test_window_kernel_closed_form(fig1_model):
    tau = np.linspace(0, 20, 301)
    K = channel_kernel(fig1_model, 0, tau)
    ref = window_kernel_closed_form(fig1_model.channels[0], tau)
    assert np.max(np.abs(K - ref)) < 1e-8


def test_memoryless_kernel_refused():
    with pytest.raises(ValueError):
        channel_kernel(LeeModel.breit_wigner(), 0, np.array([1.0]))


def test_fig2_sum_rule(fig2_densities):
    assert fig2_densities.sum_rule_residual() < 1e-3
    assert np.allclose(fig2_densities.h_channels[:, 0], 0.0, atol=1e-12)


def test_bw_two_channel_ratio_constant():
    m = LeeModel.breit_wigner(M=2.0, widths=(0.36, 0.16))
    cd = partial_decay_densities(m, np.linspace(0, 25, 251))
    r = cd.ratio[1:]
    assert np.max(np.abs(r - 2.25)) < 1e-3


def test_equal_channels_ratio_one():
    ch = Channel.from_g2(0.2, Window(0.0, 5.0))
    cd = partial_decay_densities(LeeModel(2.0, (ch, ch)), np.linspace(0, 20, 201))
    assert np.nanmax(np.abs(cd.ratio - 1)) < 1e-12


def test_ratio_undefined_at_start(fig2_densities):
    assert np.isnan(fig2_densities.ratio[0])
    one = ChannelDensities(t=np.zeros(2), h_channels=np.ones((1, 2)), p=np.ones(2), h=np.ones(2))
    with pytest.raises(ValueError):
        density_ratio(one)


def test_product_integration_converges(fig2_model):
    t = np.linspace(0, 10, 51)
    coarse = partial_decay_densities(fig2_model, t, step=0.1, conv_tol=1.0)
    fine = partial_decay_densities(fig2_model, t, step=0.05, conv_tol=1.0)
    # second-order scheme: halving the step cuts the difference by about 4
    assert fine.correction < coarse.correction / 3
    ref = partial_decay_densities(fig2_model, t, step=0.01)
    assert np.max(np.abs(fine.h_channels - ref.h_channels)) < 1e-5


def test_convolution_self_check_raises(fig2_model):
    with pytest.raises(ConvolutionError):
        partial_decay_densities(fig2_model, np.linspace(0, 5, 11), step=0.5, conv_tol=1e-12)


@pytest.mark.parametrize("t", [np.array([0.0, 1.0, 3.0]), np.array([1.0, 2.0]), np.array([0.0])])
def test_grid_validation(fig2_model, t):
    with pytest.raises(ValueError):
        partial_decay_densities(fig2_model, t)


def test_embedding_reproduces_lee_kernels(fig2_model):
    """Rebuilding the kernels from d_S alone gives the Lee channel densities."""
    t = np.linspace(0, 25, 251)
    direct = partial_decay_densities(fig2_model, t)
    sp = lee_spectral_function(fig2_model)

    def frac(i):
        def f(E):
            im = [ch.imag_self_energy(E) for ch in fig2_model.channels]
            tot = sum(im)
            return np.where(tot != 0, im[i] / np.where(tot != 0, tot, 1.0), 0.0)
        return f

    src = embedded_kernel_sources(sp, [frac(0), frac(1)], t[-1])
    rebuilt = kernel_densities(sp, src, t, center=fig2_model.M)
    assert np.max(np.abs(rebuilt.h_channels - direct.h_channels)) < 1e-7


@given(st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.floats(0.1, 1.5), st.floats(1.0, 4.0))
def test_sum_rule_property(g2a, g2b, E0b, M):
    m = two_window_model(M=M, g2=(g2a, g2b), E0=(0.0, E0b))
    cd = partial_decay_densities(m, np.linspace(0, 10, 101))
    assert cd.sum_rule_residual() < 1e-3
