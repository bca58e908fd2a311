"""Spectral Galerkin / tamed exponential Euler simulation of the stochastic Allen-Cahn equation.

On (0, 1) with Dirichlet boundaries,

    du = (u_xx + f(u)) dt + dW,   f(u) = -a3 u^3 + a2 u^2 + a1 u + a0,

is discretized in space by projection onto the first N sine modes and in
time by an explicit exponential Euler step whose drift is tamed by
1 + tau^beta (|V|_inf^6 + |V|_{H^beta}^6).
"""
__version__ = "0.1.0"

from .errors import BlowUpError, ConfigError, ConvergenceError, DomainError, PreconditionError
from .functionals import FunctionalSpec
from .noise import (
    NoiseSpectrum,
    RngStream,
    convolution_increment,
    refine_coupling,
    regularity_check,
    stationary_convolution_sample,
)
from .operators import (
    ModelParams,
    nemytskii,
    one_sided_lipschitz,
    phi_operator,
    semigroup_apply,
    taming_factor,
)
from .scheme import (
    SchemeConfig,
    TrajectoryRecord,
    run_coupled_pair,
    run_trajectory,
    semi_implicit_step,
    tamed_exp_euler_step,
    untamed_exp_euler_step,
)
from .spectral import (
    CollocationGrid,
    SpectralField,
    eigenfunction_value,
    eigenvalue,
    sobolev_norm,
    sup_norm,
    to_physical,
    to_spectral,
)
