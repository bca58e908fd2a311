"""Deterministic operator algebra of the tamed exponential Euler step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .spectral import (
    OVERSAMPLING,
    CollocationGrid,
    SpectralField,
    eigenvalues,
    sobolev_norm_array,
    sup_norm_array,
    to_physical_array,
    to_spectral_array,
)

# exponent on both norms in the taming denominator; fixed, not configurable
TAMING_POWER = 6


@dataclass(frozen=True)
class ModelParams:
    """Cubic drift f(x) = -a3 x^3 + a2 x^2 + a1 x + a0 with a3 > 0."""

    a0: float = 0.0
    a1: float = 1.0
    a2: float = 0.0
    a3: float = 1.0

    def __post_init__(self):
        for name in ("a0", "a1", "a2", "a3"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.a3 <= 0:
            raise DomainError(f"a3 must be strictly positive, got {self.a3}")

    @property
    def lipschitz_onesided(self) -> float:
        return one_sided_lipschitz(self)

    def f(self, x):
        """Pointwise drift, evaluated in Horner form."""
        return ((-self.a3 * x + self.a2) * x + self.a1) * x + self.a0


def one_sided_lipschitz(params: ModelParams) -> float:
    """L_F = sup_x f'(x) = a1 + a2^2 / (3 a3), the vertex of the parabola f'."""
    if params.a3 <= 0:
        raise DomainError("a3 must be strictly positive")
    return params.a1 + params.a2**2 / (3.0 * params.a3)


def semigroup_factors(n_modes: int, t: float) -> np.ndarray:
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    return np.exp(-eigenvalues(n_modes) * t)


def phi_multipliers(n_modes: int, tau: float) -> np.ndarray:
    """Per-mode (1 - exp(-lambda_k tau)) / lambda_k."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    lam = eigenvalues(n_modes)
    return -np.expm1(-lam * tau) / lam


def nemytskii_array(coeffs: np.ndarray, params: ModelParams, m_points: int) -> np.ndarray:
    n = coeffs.shape[-1]
    if m_points < OVERSAMPLING * n:
        raise PreconditionError(
            f"nonlinearity needs m >= {OVERSAMPLING * n} grid points, got {m_points}"
        )
    values = to_physical_array(coeffs, m_points)
    return to_spectral_array(params.f(values), n)


def taming_factor_array(coeffs, tau, beta, m_points, power=TAMING_POWER):
    tau_beta = tau**beta
    sup = sup_norm_array(coeffs, m_points)
    hb = sobolev_norm_array(coeffs, beta)
    return 1.0 / (1.0 + tau_beta * sup**power + tau_beta * hb**power)


def semigroup_apply(field: SpectralField, t: float) -> SpectralField:
    return SpectralField(semigroup_factors(field.n_modes, t) * field.coeffs)


def phi_operator(field: SpectralField, tau: float) -> SpectralField:
    """A_N^{-1}(I - S_N(tau)) applied mode by mode."""
    return SpectralField(phi_multipliers(field.n_modes, tau) * field.coeffs)


def nemytskii(field: SpectralField, params: ModelParams, grid: CollocationGrid) -> SpectralField:
    """P_N F(v), evaluated pseudo-spectrally on ``grid``."""
    grid.require(field.n_modes, OVERSAMPLING)
    return SpectralField(nemytskii_array(field.coeffs, params, grid.m_points))


def _check_beta(beta: float) -> None:
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")


def taming_factor(field: SpectralField, tau: float, beta: float, grid: CollocationGrid) -> float:
    """1 / (1 + tau^beta |v|_inf^6 + tau^beta |v|_{H^beta}^6)."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    _check_beta(beta)
    grid.require(field.n_modes, OVERSAMPLING)
    return float(taming_factor_array(field.coeffs, tau, beta, grid.m_points))
