"""Unstable-state decay: spectral functions, survival and decay densities."""

__version__ = "0.1.0"

from .numerics import (
    QuadratureConfig,
    QuadratureError,
    differentiate_central,
    find_root_bisect,
    integrate_adaptive,
    integrate_oscillatory,
    integrate_principal_value,
)
from .spectral import Moment, Pole, PowerTail, SpectralFunction, breit_wigner_density, moment
from .lee import (
    Channel,
    ConstantOne,
    LeeModel,
    Tabulated,
    Window,
    find_poles,
    golden_rule_width,
    lee_spectral_function,
    normalization,
    self_energy,
    spectral_density,
    two_window_model,
)
from .qft import (
    FermionPair,
    QftModel,
    ScalarPair,
    find_qft_poles,
    qft_normalization,
    qft_partial_densities,
    qft_spectral_density,
    qft_spectral_function,
    real_self_energy,
)
from .evolution import (
    ChannelDensities,
    ConvolutionError,
    SurvivalSeries,
    channel_kernel,
    decay_density,
    density_ratio,
    partial_decay_densities,
    survival_amplitude,
    survival_probability,
    survival_series,
)
from .emission import EmissionSpectrum, emission_spectrum, linewidth, photon_spectrum
from .oracle import DiscretizedModel, channel_occupations, discretize, evolve_exact
from .config import ConfigError, RunConfig, parse_config
from .kernels import BACKEND
