"""Galerkin space H^N in the Dirichlet sine basis.

Coefficients are stored against the L^2-orthonormal basis
phi_k(x) = sqrt(2) sin(k pi x) on (0, 1), with eigenvalues lambda_k = k^2 pi^2
of the Dirichlet Laplacian. Physical values live on the uniform interior grid
x_j = j / (m + 1), j = 1..m, where synthesis and analysis are a DST-I pair.

The ``*_array`` helpers act on the trailing axis so a batch of fields
(shape ``(B, N)``) goes through the same code path as a single field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import DomainError, PreconditionError

SQRT2 = math.sqrt(2.0)

# sup-norm and pseudo-spectral nonlinearity both need m >= OVERSAMPLING * N
OVERSAMPLING = 4


def eigenvalue(k: int) -> float:
    if k < 1:
        raise DomainError(f"mode index must be >= 1, got {k}")
    return k * k * math.pi**2


def eigenvalues(n_modes: int) -> np.ndarray:
    """lambda_1..lambda_N as a float array."""
    k = np.arange(1, n_modes + 1, dtype=float)
    return k * k * math.pi**2


def eigenfunction_value(k: int, x: float) -> float:
    if k < 1:
        raise DomainError(f"mode index must be >= 1, got {k}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    return SQRT2 * math.sin(k * math.pi * x)


@dataclass(frozen=True)
class SpectralField:
    """An element of H^N given by its N sine-mode coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("coeffs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(c)):
            raise DomainError("coeffs contain non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, n_modes: int) -> SpectralField:
        return cls(np.zeros(n_modes))

    @classmethod
    def unit(cls, n_modes: int, k: int, amplitude: float = 1.0) -> SpectralField:
        if not 1 <= k <= n_modes:
            raise DomainError(f"mode {k} outside 1..{n_modes}")
        c = np.zeros(n_modes)
        c[k - 1] = amplitude
        return cls(c)

    def resized(self, n_modes: int) -> SpectralField:
        """Truncate (P_N) or zero-pad to ``n_modes`` coefficients."""
        c = np.zeros(n_modes)
        n = min(n_modes, self.n_modes)
        c[:n] = self.coeffs[:n]
        return SpectralField(c)

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same_size(self, other)
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same_size(self, other)
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.coeffs * scalar)

    __rmul__ = __mul__


def _check_same_size(u: SpectralField, v: SpectralField) -> None:
    if u.n_modes != v.n_modes:
        raise PreconditionError(f"mode counts differ: {u.n_modes} vs {v.n_modes}")


@dataclass(frozen=True)
class CollocationGrid:
    """Uniform interior grid x_j = j/(m+1) on (0, 1)."""

    m_points: int

    def __post_init__(self):
        if self.m_points < 1:
            raise DomainError("m_points must be positive")

    @classmethod
    def for_modes(cls, n_modes: int) -> CollocationGrid:
        """Smallest grid with m >= 4N, m + 1 even and FFT-friendly.

        An even m + 1 puts x = 1/2 on the grid, where odd modes peak.
        """
        half = scipy.fft.next_fast_len(-(-(OVERSAMPLING * n_modes + 1) // 2))
        return cls(2 * half - 1)

    @cached_property
    def abscissae(self) -> np.ndarray:
        return np.arange(1, self.m_points + 1) / (self.m_points + 1)

    def basis_matrix(self, n_modes: int) -> np.ndarray:
        """Matrix P with P[k-1, j-1] = phi_k(x_j), shape (N, m)."""
        self.require(n_modes, 1)
        k = np.arange(1, n_modes + 1)[:, None]
        j = np.arange(1, self.m_points + 1)[None, :]
        # reduce k*j mod 2(m+1) so sin sees small exact arguments
        arg = (k * j) % (2 * (self.m_points + 1))
        return SQRT2 * np.sin(np.pi * arg / (self.m_points + 1))

    def require(self, n_modes: int, factor: int) -> None:
        if self.m_points < factor * n_modes:
            raise PreconditionError(
                f"grid of {self.m_points} points too coarse for {n_modes} modes "
                f"(need >= {factor * n_modes})"
            )


# --------------------------------------------------------------------------
# array-level transforms (trailing axis = modes / grid points)


def to_physical_array(coeffs: np.ndarray, m_points: int) -> np.ndarray:
    n = coeffs.shape[-1]
    if m_points < n:
        raise PreconditionError(f"grid of {m_points} points too coarse for {n} modes")
    pad = np.zeros(coeffs.shape[:-1] + (m_points,))
    pad[..., :n] = coeffs
    return scipy.fft.dst(pad, type=1, axis=-1) * (SQRT2 / 2.0)


def to_spectral_array(values: np.ndarray, n_modes: int) -> np.ndarray:
    m = values.shape[-1]
    if m < n_modes:
        raise PreconditionError(f"grid of {m} points too coarse for {n_modes} modes")
    full = scipy.fft.dst(values, type=1, axis=-1)
    return full[..., :n_modes] / (SQRT2 * (m + 1))


def sobolev_norm_array(coeffs: np.ndarray, s: float) -> np.ndarray:
    lam = eigenvalues(coeffs.shape[-1])
    return np.sqrt(np.sum(lam**s * coeffs**2, axis=-1))


def sup_norm_array(coeffs: np.ndarray, m_points: int) -> np.ndarray:
    return np.max(np.abs(to_physical_array(coeffs, m_points)), axis=-1)


# --------------------------------------------------------------------------
# field-level operations


def to_physical(field: SpectralField, grid: CollocationGrid) -> np.ndarray:
    grid.require(field.n_modes, 1)
    return to_physical_array(field.coeffs, grid.m_points)


def to_spectral(values, grid: CollocationGrid, n_modes: int) -> SpectralField:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.m_points,):
        raise PreconditionError(
            f"expected {grid.m_points} samples, got shape {values.shape}"
        )
    grid.require(n_modes, 1)
    return SpectralField(to_spectral_array(values, n_modes))


def sobolev_norm(field: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm (sum_k lambda_k^s c_k^2)^(1/2)."""
    return float(sobolev_norm_array(field.coeffs, s))


def sup_norm(field: SpectralField, grid: CollocationGrid) -> float:
    """Max of |v| over the grid; a lower bound on the true L^inf norm."""
    grid.require(field.n_modes, OVERSAMPLING)
    return float(sup_norm_array(field.coeffs, grid.m_points))
