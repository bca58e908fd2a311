"""Exact sampling of the Q-Wiener stochastic convolution in the sine eigenbasis.

Q commutes with the Laplacian, so every mode of the stochastic convolution
is an independent Ornstein-Uhlenbeck process and its increments over a
step can be drawn exactly. Randomness comes from counter-based Philox
streams keyed by (master_seed, stream_id); a Monte Carlo sample owns one
stream, so results never depend on the order in which samples are run.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .spectral import SpectralField, eigenvalues

_U64 = (1 << 64) - 1
# exponent tolerance when deciding the summability boundary
_BOUNDARY_TOL = 1e-12


class BoundaryRegularityWarning(UserWarning):
    """Declared beta sits exactly on the summability boundary (white noise, beta=1/2)."""


@dataclass(frozen=True)
class NoiseSpectrum:
    """Diagonal covariance q_k = k^(-2 r); ``white`` means r = 0."""

    kind: str
    decay: float
    beta: float
    n_modes: int

    def __post_init__(self):
        if self.kind not in ("white", "power_law"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.kind == "white" and self.decay != 0.0:
            raise DomainError("white noise has decay 0")
        if self.decay < 0:
            raise DomainError("decay must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if self.n_modes < 1:
            raise DomainError("n_modes must be positive")

    @classmethod
    def white(cls, n_modes: int, beta: float = 0.5) -> NoiseSpectrum:
        return cls("white", 0.0, beta, n_modes)

    @classmethod
    def power_law(cls, n_modes: int, decay: float = 1.0, beta: float = 1.0) -> NoiseSpectrum:
        return cls("power_law", float(decay), beta, n_modes)

    def with_modes(self, n_modes: int) -> NoiseSpectrum:
        return NoiseSpectrum(self.kind, self.decay, self.beta, n_modes)

    @property
    def q(self) -> np.ndarray:
        k = np.arange(1, self.n_modes + 1, dtype=float)
        return k ** (-2.0 * self.decay)

    @property
    def tail_exponent(self) -> float:
        """Exponent e in lambda_k^(beta-1) q_k ~ k^e."""
        return 2.0 * (self.beta - 1.0) - 2.0 * self.decay


@dataclass(frozen=True)
class RegularityResult:
    admissible: bool
    partial_sum: float
    tail_exponent: float
    at_boundary: bool


def regularity_check(spectrum: NoiseSpectrum) -> RegularityResult:
    """Summability of sum_k lambda_k^(beta-1) q_k, judged by its tail exponent."""
    lam = eigenvalues(spectrum.n_modes)
    partial = float(np.sum(lam ** (spectrum.beta - 1.0) * spectrum.q))
    e = spectrum.tail_exponent
    at_boundary = abs(e + 1.0) <= _BOUNDARY_TOL
    admissible = e < -1.0 or at_boundary
    if at_boundary:
        warnings.warn(
            f"noise regularity beta={spectrum.beta} is on the summability boundary",
            BoundaryRegularityWarning,
            stacklevel=2,
        )
    return RegularityResult(admissible, partial, e, at_boundary)


class RngStream:
    """Reproducible Gaussian stream keyed by (master_seed, stream_id).

    ``purpose`` offsets the Philox counter so independent uses inside one
    sample (path noise, a stationary initial draw) never overlap.
    """

    def __init__(self, master_seed: int, stream_id: int = 0, purpose: int = 0):
        self.master_seed = int(master_seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self.purpose = int(purpose) & _U64
        bitgen = np.random.Philox(
            key=np.array([self.master_seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, 0, self.purpose], dtype=np.uint64),
        )
        self._gen = np.random.Generator(bitgen)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    @property
    def counter(self) -> np.ndarray:
        return np.array(self._gen.bit_generator.state["state"]["counter"])

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


# purpose tags for RngStream
PATH = 0
STATIONARY = 1


def convolution_variances(q: np.ndarray, tau: float) -> np.ndarray:
    """q_k (1 - exp(-2 lambda_k tau)) / (2 lambda_k); tau = inf gives the stationary law."""
    lam = eigenvalues(len(q))
    if math.isinf(tau):
        return q / (2.0 * lam)
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return q * -np.expm1(-2.0 * lam * tau) / (2.0 * lam)


def convolution_increment(spectrum: NoiseSpectrum, tau: float, rng: RngStream) -> SpectralField:
    """Exact draw of int_0^tau S_N(tau - s) P_N dW(s)."""
    std = np.sqrt(convolution_variances(spectrum.q, tau))
    return SpectralField(std * rng.normal(spectrum.n_modes))


def wiener_increment(spectrum: NoiseSpectrum, tau: float, rng: RngStream) -> SpectralField:
    """P_N (W(t + tau) - W(t)); drives the backward Euler baseline."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return SpectralField(np.sqrt(spectrum.q * tau) * rng.normal(spectrum.n_modes))


def refine_coupling(fine_increments: Sequence[SpectralField], tau_fine: float) -> SpectralField:
    """Convolution increment over len(fine_increments) * tau_fine from the fine ones.

    Horner accumulation of sum_j exp(-lambda_k (r-1-j) tau_fine) dO_j, so the
    coarse step sees the same Brownian path as the fine trajectory.
    """
    if len(fine_increments) == 0:
        raise PreconditionError("need at least one fine increment")
    n = fine_increments[0].n_modes
    if any(inc.n_modes != n for inc in fine_increments):
        raise PreconditionError("fine increments have different mode counts")
    decay = np.exp(-eigenvalues(n) * tau_fine)
    acc = np.array(fine_increments[0].coeffs)
    for inc in fine_increments[1:]:
        acc = decay * acc + inc.coeffs
    return SpectralField(acc)


def stationary_convolution_sample(spectrum: NoiseSpectrum, rng: RngStream) -> SpectralField:
    """Draw from the t -> infinity Gaussian law of the Galerkin stochastic convolution."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryRegularityWarning)
        check = regularity_check(spectrum)
    if not check.admissible:
        raise DomainError(
            f"noise spectrum {spectrum.kind} with beta={spectrum.beta} is not admissible"
        )
    std = np.sqrt(convolution_variances(spectrum.q, math.inf))
    return SpectralField(std * rng.normal(spectrum.n_modes))
