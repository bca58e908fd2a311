"""Time stepping: the tamed accelerated exponential Euler scheme and two baselines.

A step maps V_k to

    V_{k+1} = S_N(tau) V_k + G_k A_N^{-1}(I - S_N(tau)) F_N(V_k) + dO_k

where G_k = 1 / (1 + tau^beta |V_k|_inf^6 + tau^beta |V_k|_{H^beta}^6) and
dO_k is the exact stochastic-convolution increment. ``untamed_exp_euler``
uses G = 1 and ``semi_implicit`` is backward Euler with the drift solved by
damped fixed-point iteration. Passing ``params=None`` disables the drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import BlowUpError, ConfigError, ConvergenceError, DomainError, PreconditionError
from .noise import (
    PATH,
    NoiseSpectrum,
    RngStream,
    convolution_increment,
    convolution_variances,
    refine_coupling,
    regularity_check,
    wiener_increment,
)
from .operators import (
    ModelParams,
    nemytskii,
    nemytskii_array,
    phi_multipliers,
    phi_operator,
    semigroup_apply,
    semigroup_factors,
    taming_factor,
)
from .spectral import CollocationGrid, SpectralField, eigenvalue, eigenvalues

VARIANTS = ("tamed_exp_euler", "untamed_exp_euler", "semi_implicit")

# any coefficient above this magnitude counts as divergence
BLOWUP_THRESHOLD = 1e12

SEMI_IMPLICIT_TOL = 1e-10
SEMI_IMPLICIT_MAX_SWEEPS = 50


@dataclass(frozen=True)
class SchemeConfig:
    n_modes: int
    tau: float
    n_steps: int
    beta: float = 1.0
    variant: str = "tamed_exp_euler"
    tau_cap: float = 1.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigError("n_modes must be positive")
        if not 0.0 < self.tau <= self.tau_cap:
            raise ConfigError(f"tau must lie in (0, tau_cap={self.tau_cap}], got {self.tau}")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.tau

    def replace(self, **changes) -> SchemeConfig:
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SchemeConfig(**values)


def check_dissipative(params: Optional[ModelParams]) -> None:
    """Reject drifts whose one-sided Lipschitz constant reaches lambda_1."""
    if params is None:
        return
    L = params.lipschitz_onesided
    if L >= eigenvalue(1):
        raise ConfigError(
            f"dissipativity assumption violated: L_F = {L:g} >= lambda_1 = pi^2 = {eigenvalue(1):.6g}"
        )


def check_noise(spectrum: NoiseSpectrum, beta: float) -> None:
    if spectrum.beta != beta:
        raise ConfigError(
            f"taming beta ({beta}) must equal the noise regularity beta ({spectrum.beta})"
        )
    if not regularity_check(spectrum).admissible:
        raise ConfigError(
            f"noise regularity violated: sum lambda_k^(beta-1) q_k diverges for "
            f"{spectrum.kind} noise with beta={spectrum.beta}"
        )


class Discretization:
    """Per-(N, tau) tables shared by every sample of an ensemble."""

    def __init__(self, cfg: SchemeConfig, params: Optional[ModelParams], grid=None):
        self.cfg = cfg
        self.params = params
        self.n_modes = cfg.n_modes
        self.tau = cfg.tau
        self.beta = cfg.beta
        self.variant = cfg.variant
        self.drift = params is not None
        self.tamed = cfg.variant == "tamed_exp_euler"
        self.grid = grid or CollocationGrid.for_modes(cfg.n_modes)
        self.grid.require(cfg.n_modes, 4)
        self.m_points = self.grid.m_points
        self.lam = eigenvalues(cfg.n_modes)
        self.decay = semigroup_factors(cfg.n_modes, cfg.tau)
        self.phi = phi_multipliers(cfg.n_modes, cfg.tau)
        self.lam_beta = self.lam**cfg.beta
        self.tau_beta = cfg.tau**cfg.beta
        self._basis = None

    @property
    def basis(self) -> np.ndarray:
        if self._basis is None:
            self._basis = np.ascontiguousarray(self.grid.basis_matrix(self.n_modes))
        return self._basis

    def noise_std(self, q: np.ndarray) -> np.ndarray:
        if self.variant == "semi_implicit":
            return np.sqrt(q * self.tau)
        return np.sqrt(convolution_variances(q, self.tau))

    def step(self, V: np.ndarray, noise: np.ndarray, backend=None) -> np.ndarray:
        """Advance a ``(B, N)`` batch by one step."""
        if self.variant == "semi_implicit":
            return semi_implicit_array(V, noise, self)
        return kernels.get_backend(backend).step_batch(V, noise, self)


def semi_implicit_array(V: np.ndarray, noise: np.ndarray, disc: Discretization) -> np.ndarray:
    """Solve (I + tau A_N) X = V + tau F_N(X) + noise row by row."""
    rhs = V + noise
    resolvent = 1.0 / (1.0 + disc.tau * disc.lam)
    if not disc.drift:
        return resolvent * rhs
    params, m, tau = disc.params, disc.m_points, disc.tau
    X = resolvent * (rhs + tau * nemytskii_array(V, params, m))
    omega = 1.0
    prev = np.inf
    for _ in range(SEMI_IMPLICIT_MAX_SWEEPS):
        with np.errstate(over="ignore", invalid="ignore"):
            T = resolvent * (rhs + tau * nemytskii_array(X, params, m))
            residual = np.sqrt(np.sum(((X - T) / resolvent) ** 2, axis=-1))
        worst = float(np.max(residual))
        if worst <= SEMI_IMPLICIT_TOL:
            return X
        if not np.isfinite(worst):
            break
        if worst > prev:
            omega *= 0.5
        prev = worst
        X = (1.0 - omega) * X + omega * T
    raise ConvergenceError(
        f"semi-implicit fixed point did not reach {SEMI_IMPLICIT_TOL:g} "
        f"in {SEMI_IMPLICIT_MAX_SWEEPS} sweeps"
    )


def diverged_rows(V: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return ~np.all(np.abs(V) <= BLOWUP_THRESHOLD, axis=-1)


# --------------------------------------------------------------------------
# single-field steps


def _check_sizes(V, noise_inc, cfg):
    if V.n_modes != cfg.n_modes or noise_inc.n_modes != cfg.n_modes:
        raise PreconditionError(
            f"field sizes {V.n_modes}, {noise_inc.n_modes} do not match N={cfg.n_modes}"
        )


def _finite_field(coeffs: np.ndarray) -> SpectralField:
    if diverged_rows(coeffs):
        raise BlowUpError("coefficients exceeded the blow-up threshold")
    return SpectralField(coeffs)


def tamed_exp_euler_step(V, params, noise_inc, cfg, grid) -> SpectralField:
    _check_sizes(V, noise_inc, cfg)
    if params is None:
        return semigroup_apply(V, cfg.tau) + noise_inc
    check_dissipative(params)
    G = taming_factor(V, cfg.tau, cfg.beta, grid)
    drift = phi_operator(nemytskii(V, params, grid), cfg.tau)
    return semigroup_apply(V, cfg.tau) + G * drift + noise_inc


def untamed_exp_euler_step(V, params, noise_inc, cfg, grid) -> SpectralField:
    """Exponential Euler with G = 1; raises BlowUpError on divergence."""
    _check_sizes(V, noise_inc, cfg)
    if params is None:
        return semigroup_apply(V, cfg.tau) + noise_inc
    check_dissipative(params)
    with np.errstate(over="ignore", invalid="ignore"):
        drift = phi_multipliers(cfg.n_modes, cfg.tau) * nemytskii_array(
            V.coeffs, params, grid.m_points
        )
        out = semigroup_factors(cfg.n_modes, cfg.tau) * V.coeffs + drift + noise_inc.coeffs
    return _finite_field(out)


def semi_implicit_step(V, params, noise_inc, cfg, grid=None) -> SpectralField:
    _check_sizes(V, noise_inc, cfg)
    if params is not None:
        check_dissipative(params)
        if cfg.tau * params.lipschitz_onesided >= 1.0:
            raise PreconditionError("semi-implicit fixed point needs tau * L_F < 1")
    disc = Discretization(cfg.replace(variant="semi_implicit"), params, grid)
    out = semi_implicit_array(V.coeffs[None, :], noise_inc.coeffs[None, :], disc)
    return _finite_field(out[0])


STEPS = {
    "tamed_exp_euler": tamed_exp_euler_step,
    "untamed_exp_euler": untamed_exp_euler_step,
    "semi_implicit": semi_implicit_step,
}


# --------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    step_times: list = field(default_factory=list)
    functionals: list = field(default_factory=list)
    states: Optional[list] = None
    blowup_step: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.blowup_step is not None


def run_trajectory(
    cfg: SchemeConfig,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    u0: SpectralField,
    functional: Callable,
    rng: RngStream,
    save_stride: int = 1,
    keep_states: bool = False,
) -> TrajectoryRecord:
    """Run K steps from P_N u0, recording ``functional`` every ``save_stride`` steps.

    Divergence (possible only without taming) stops the run and is reported
    through ``blowup_step`` rather than raised.
    """
    check_dissipative(params)
    check_noise(spectrum, cfg.beta)
    if save_stride < 1 or (cfg.n_steps and cfg.n_steps % save_stride):
        raise PreconditionError("save_stride must be positive and divide n_steps")
    spectrum = spectrum.with_modes(cfg.n_modes)
    grid = CollocationGrid.for_modes(cfg.n_modes)
    step = STEPS[cfg.variant]
    draw = wiener_increment if cfg.variant == "semi_implicit" else convolution_increment

    V = u0.resized(cfg.n_modes)
    rec = TrajectoryRecord(states=[] if keep_states else None)

    def save(k, V):
        rec.step_times.append(k * cfg.tau)
        rec.functionals.append(functional(V))
        if keep_states:
            rec.states.append(V)

    save(0, V)
    for k in range(1, cfg.n_steps + 1):
        try:
            V = step(V, params, draw(spectrum, cfg.tau, rng), cfg, grid)
        except (BlowUpError, DomainError):
            rec.blowup_step = k
            break
        if diverged_rows(V.coeffs):
            rec.blowup_step = k
            break
        if k % save_stride == 0:
            save(k, V)
    return rec


def run_coupled_pair(coarse_cfg, fine_cfg, params, spectrum, u0, rng):
    """Run two resolutions on one Brownian path; returns (coarse_final, fine_final).

    The coarse run uses the first coarse N modes of the fine noise, and its
    increments are the fine increments folded together by refine_coupling.
    """
    ratio = coarse_cfg.tau / fine_cfg.tau
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * ratio:
        raise PreconditionError("coarse tau must be an integer multiple of fine tau")
    if coarse_cfg.n_modes > fine_cfg.n_modes:
        raise PreconditionError("coarse N must not exceed fine N")
    if fine_cfg.n_steps != r * coarse_cfg.n_steps:
        raise PreconditionError("coarse and fine horizons differ")
    if "semi_implicit" in (coarse_cfg.variant, fine_cfg.variant):
        raise PreconditionError("coupling is defined for the exponential variants only")
    check_dissipative(params)
    check_noise(spectrum, fine_cfg.beta)
    nc, nf = coarse_cfg.n_modes, fine_cfg.n_modes
    fine_spec = spectrum.with_modes(nf)
    grid_f = CollocationGrid.for_modes(nf)
    grid_c = CollocationGrid.for_modes(nc)
    step_f, step_c = STEPS[fine_cfg.variant], STEPS[coarse_cfg.variant]

    Vf = u0.resized(nf)
    Vc = u0.resized(nc)
    pending = []
    for _ in range(fine_cfg.n_steps):
        inc = convolution_increment(fine_spec, fine_cfg.tau, rng)
        Vf = step_f(Vf, params, inc, fine_cfg, grid_f)
        pending.append(inc.resized(nc))
        if len(pending) == r:
            Vc = step_c(Vc, params, refine_coupling(pending, fine_cfg.tau), coarse_cfg, grid_c)
            pending = []
    return Vc, Vf


def initial_field(preset: str, n_modes: int, scale: float = 1.0, coeffs=None) -> SpectralField:
    """Named initial data: ``zero``, ``sine`` (sin(pi x)), ``unit`` (phi_1) or ``coeffs``."""
    if preset == "zero":
        c = np.zeros(n_modes)
    elif preset == "sine":
        c = np.zeros(n_modes)
        c[0] = 1.0 / math.sqrt(2.0)
    elif preset == "unit":
        c = np.zeros(n_modes)
        c[0] = 1.0
    elif preset == "coeffs":
        if coeffs is None:
            raise DomainError("preset 'coeffs' needs a coefficient list")
        c = np.zeros(n_modes)
        given = np.asarray(coeffs, dtype=float)[:n_modes]
        c[: given.size] = given
    else:
        raise DomainError(f"unknown initial preset {preset!r}")
    return SpectralField(scale * c)
