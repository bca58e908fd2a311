"""Monte Carlo estimators: weak errors, convergence rates, moments, ergodicity."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .engine import Level, run_ensemble
from .errors import PreconditionError
from .functionals import FunctionalSpec
from .noise import NoiseSpectrum
from .operators import ModelParams
from .scheme import Discretization, SchemeConfig, check_dissipative, check_noise
from .spectral import SpectralField, eigenvalue, sup_norm_array

# errors must exceed this many standard errors to enter a rate fit
SIGNAL_TO_NOISE = 3.0
# errors below this fraction of |reference mean| are double-precision round-off
ROUNDOFF_FLOOR = 1e-12
MIN_FIT_POINTS = 3


def _coeffs(u0) -> np.ndarray:
    if isinstance(u0, SpectralField):
        return u0.coeffs
    return np.asarray(u0, dtype=float)


def _mean_se(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise PreconditionError("need at least two samples for a standard error")
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _steps(horizon: float, tau: float) -> int:
    k = int(round(horizon / tau))
    if k < 1 or abs(k * tau - horizon) > 1e-9 * max(horizon, tau):
        raise PreconditionError(f"horizon {horizon} is not a whole number of steps of {tau}")
    return k


def _integer_ratio(coarse: float, fine: float) -> int:
    r = int(round(coarse / fine))
    if r < 1 or abs(r * fine - coarse) > 1e-9 * coarse:
        raise PreconditionError(f"tau_ref={fine} does not divide tau={coarse}")
    return r


def _validate(params, spectrum, beta):
    check_dissipative(params)
    check_noise(spectrum, beta)


def dissipation_gap(params: Optional[ModelParams]) -> float:
    """lambda_1 - L_F; the drift-free model has L_F = 0."""
    L = 0.0 if params is None else params.lipschitz_onesided
    return eigenvalue(1) - L


# --------------------------------------------------------------------------
# single estimates


@dataclass
class Estimate:
    mean: float
    standard_error: float
    M: int
    n_diverged: int = 0

    @property
    def flagged(self) -> bool:
        return self.n_diverged > 0


def mc_weak_value(
    cfg: SchemeConfig,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    u0,
    functional: FunctionalSpec,
    M: int,
    master_seed: int,
    threads: int = 1,
    backend=None,
) -> Estimate:
    """Sample mean of Phi(V_K) over M independent trajectories.

    Diverged samples (untamed control only) are excluded and counted.
    """
    if M < 2:
        raise PreconditionError("M must be at least 2")
    _validate(params, spectrum, cfg.beta)
    disc = Discretization(cfg, params)
    res = run_ensemble(disc, cfg.n_steps, _coeffs(u0), spectrum, M, master_seed,
                       threads=threads, backend=backend)
    ok = res.blowup_step < 0
    values = functional.evaluate(res.final[ok])
    n_bad = int(M - ok.sum())
    if values.size < 2:
        return Estimate(math.nan, math.nan, M, n_bad)
    mean, se = _mean_se(values)
    return Estimate(mean, se, M, n_bad)


# --------------------------------------------------------------------------
# rate regression


@dataclass
class RateFit:
    slope: Optional[float]
    halfwidth: Optional[float]
    intercept: Optional[float] = None
    n_points: int = 0

    @property
    def indeterminate(self) -> bool:
        return self.slope is None


def rate_regression(x, y, weights=None, confidence: float = 0.95) -> RateFit:
    """Weighted least-squares slope of y on x with a t-based half-width.

    ``x`` and ``y`` are already in log space. The half-width comes from the
    weighted residual variance, so an exact fit has half-width 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & np.isfinite(w) & (w > 0)
    x, y, w = x[keep], y[keep], w[keep]
    n = x.size
    if n < MIN_FIT_POINTS or np.ptp(x) == 0:
        return RateFit(None, None, None, n)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    s2 = np.sum(w * resid**2) / (n - 2)
    tq = stats.t.ppf(0.5 + confidence / 2, n - 2)
    return RateFit(float(slope), float(tq * math.sqrt(s2 / sxx)), float(intercept), n)


# --------------------------------------------------------------------------
# weak error sweeps


@dataclass
class WeakErrorRow:
    tau: float
    N: int
    mean: float
    stderr: float
    error_vs_ref: float
    error_stderr: float
    M: int


@dataclass
class WeakErrorReport:
    rows: list
    ref_tau: float
    ref_N: int
    ref_mean: float
    ref_stderr: float
    fitted_rate_tau: Optional[float] = None
    fitted_rate_N: Optional[float] = None
    rate_confidence_halfwidth: Optional[float] = None
    n_fit_points: int = 0
    n_diverged: int = 0
    beta_at_boundary: bool = False

    @property
    def indeterminate(self) -> bool:
        return self.rate_confidence_halfwidth is None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rows"] = [asdict(r) if not isinstance(r, dict) else r for r in self.rows]
        return d


def _usable(rows, ref_mean):
    floor = ROUNDOFF_FLOOR * max(abs(ref_mean), 1.0)
    return [r for r in rows if r.error_vs_ref > SIGNAL_TO_NOISE * r.error_stderr and r.error_vs_ref > floor]


def _fit_rows(rows, key, ref_mean):
    use = _usable(rows, ref_mean)
    x = [math.log(getattr(r, key)) for r in use]
    y = [math.log(r.error_vs_ref) for r in use]
    w = [(r.error_vs_ref / r.error_stderr) ** 2 if r.error_stderr > 0 else 1e12 for r in use]
    return rate_regression(x, y, w)


def _coupled_sweep(fine_cfg, level_cfgs, params, spectrum, u0, functional, M, seed, threads, backend):
    fine = Discretization(fine_cfg, params)
    levels = [
        Level(Discretization(c, params), _integer_ratio(c.tau, fine_cfg.tau)) for c in level_cfgs
    ]
    res = run_ensemble(fine, fine_cfg.n_steps, _coeffs(u0), spectrum, M, seed, levels=levels,
                       threads=threads, backend=backend)
    ok = res.blowup_step < 0
    ref_vals = functional.evaluate(res.final[ok])
    ref_mean, ref_se = _mean_se(ref_vals)
    rows = []
    for c, Vl in zip(level_cfgs, res.level_finals):
        vals = functional.evaluate(Vl[ok])
        mean, se = _mean_se(vals)
        dmean, dse = _mean_se(vals - ref_vals)
        rows.append(WeakErrorRow(c.tau, c.n_modes, mean, se, abs(dmean), dse, int(ok.sum())))
    return rows, ref_mean, ref_se, int((~ok).sum())


def weak_error_sweep(
    tau_list: Sequence[float],
    N_ref: int,
    tau_ref: float,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    u0,
    functional: FunctionalSpec,
    M: int,
    seed: int,
    horizon: float = 1.0,
    variant: str = "tamed_exp_euler",
    threads: int = 1,
    backend=None,
) -> WeakErrorReport:
    """Temporal weak errors at fixed N against a coupled fine-step reference."""
    beta = spectrum.beta
    _validate(params, spectrum, beta)
    cap = max(max(tau_list), 1.0)
    fine_cfg = SchemeConfig(N_ref, tau_ref, _steps(horizon, tau_ref), beta, variant, cap)
    level_cfgs = []
    for tau in tau_list:
        _integer_ratio(tau, tau_ref)
        level_cfgs.append(SchemeConfig(N_ref, tau, _steps(horizon, tau), beta, variant, cap))
    rows, ref_mean, ref_se, bad = _coupled_sweep(
        fine_cfg, level_cfgs, params, spectrum, u0, functional, M, seed, threads, backend
    )
    fit = _fit_rows(rows, "tau", ref_mean)
    return WeakErrorReport(
        rows, tau_ref, N_ref, ref_mean, ref_se,
        fitted_rate_tau=fit.slope, rate_confidence_halfwidth=fit.halfwidth,
        n_fit_points=fit.n_points, n_diverged=bad,
        beta_at_boundary=abs(spectrum.tail_exponent + 1.0) < 1e-12,
    )


def spatial_error_sweep(
    N_list: Sequence[int],
    tau: float,
    N_ref: int,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    u0,
    functional: FunctionalSpec,
    M: int,
    seed: int,
    horizon: float = 1.0,
    variant: str = "tamed_exp_euler",
    threads: int = 1,
    backend=None,
) -> WeakErrorReport:
    """Spatial weak errors at fixed tau against a coupled N_ref reference.

    Every coarse N uses the first N modes of the reference noise.
    """
    if N_ref < 4 * max(N_list):
        raise PreconditionError("N_ref must be at least 4 * max(N_list)")
    beta = spectrum.beta
    _validate(params, spectrum, beta)
    K = _steps(horizon, tau)
    cap = max(tau, 1.0)
    fine_cfg = SchemeConfig(N_ref, tau, K, beta, variant, cap)
    level_cfgs = [SchemeConfig(n, tau, K, beta, variant, cap) for n in N_list]
    rows, ref_mean, ref_se, bad = _coupled_sweep(
        fine_cfg, level_cfgs, params, spectrum, u0, functional, M, seed, threads, backend
    )
    fit = _fit_rows(rows, "N", ref_mean)
    return WeakErrorReport(
        rows, tau, N_ref, ref_mean, ref_se,
        fitted_rate_N=fit.slope, rate_confidence_halfwidth=fit.halfwidth,
        n_fit_points=fit.n_points, n_diverged=bad,
        beta_at_boundary=abs(spectrum.tail_exponent + 1.0) < 1e-12,
    )


# --------------------------------------------------------------------------
# moments


@dataclass
class MomentCurve:
    times: np.ndarray
    estimates: dict
    standard_errors: dict
    flatness: dict
    n_diverged: int = 0
    max_abs_coeff: float = 0.0


def moment_window_means(times, values, horizon):
    """(early, late) window means: t in [0.1T, 0.2T] and t in [0.9T, T]."""
    times = np.asarray(times)
    early = (times >= 0.1 * horizon - 1e-12) & (times <= 0.2 * horizon + 1e-12)
    late = times >= 0.9 * horizon - 1e-12
    return float(np.mean(values[early])), float(np.mean(values[late]))


def moment_curve(
    cfg: SchemeConfig,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    u0,
    p=(2, 4),
    M: int = 2000,
    seed: int = 0,
    save_stride: int = 1,
    threads: int = 1,
    backend=None,
) -> MomentCurve:
    """E |V_k|_inf^p along the run, with a late/early flatness ratio per p."""
    ps = (p,) if np.isscalar(p) else tuple(p)
    if any(pp not in (2, 4, 8) for pp in ps):
        raise PreconditionError("p must be one of 2, 4, 8")
    if M < 1000:
        raise PreconditionError("moment curves need M >= 1000")
    _validate(params, spectrum, cfg.beta)
    disc = Discretization(cfg, params)
    m = disc.m_points
    res = run_ensemble(
        disc, cfg.n_steps, _coeffs(u0), spectrum, M, seed,
        record=lambda V: sup_norm_array(V, m), save_stride=save_stride,
        threads=threads, backend=backend,
    )
    sup = res.records
    est, ses, flat = {}, {}, {}
    for pp in ps:
        vals = sup**pp
        est[pp] = vals.mean(axis=1)
        ses[pp] = vals.std(axis=1, ddof=1) / math.sqrt(M)
        early, late = moment_window_means(res.record_times, est[pp], cfg.horizon)
        flat[pp] = late / early if early > 0 else math.inf
    return MomentCurve(
        res.record_times, est, ses, flat,
        n_diverged=int((res.blowup_step >= 0).sum()),
        max_abs_coeff=float(np.max(np.abs(res.final))),
    )


# --------------------------------------------------------------------------
# ergodicity and invariant measure


@dataclass
class ErgodicFit:
    rate: Optional[float]
    halfwidth: Optional[float]
    floor: float
    times: np.ndarray
    gaps: np.ndarray
    gap_stderr: np.ndarray
    window: tuple = (0, 0)

    @property
    def indeterminate(self) -> bool:
        return self.rate is None


def ergodic_decay(
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    cfg: SchemeConfig,
    u0_a,
    u0_b,
    functional: FunctionalSpec,
    M: int,
    seed: int,
    threads: int = 1,
    backend=None,
) -> ErgodicFit:
    """Exponential decay rate of |E Phi(V_k; a) - E Phi(V_k; b)|.

    Both ensembles share noise (same seed), so the gap is estimated from
    paired differences. The fit uses the steps where the gap exceeds three
    standard errors and stays above round-off relative to its peak.
    """
    _validate(params, spectrum, cfg.beta)
    disc = Discretization(cfg, params)
    rec = functional.evaluate

    def run(u0):
        return run_ensemble(disc, cfg.n_steps, _coeffs(u0), spectrum, M, seed,
                            record=rec, threads=threads, backend=backend)

    ra, rb = run(u0_a), run(u0_b)
    diff = ra.records - rb.records
    gaps = np.abs(diff.mean(axis=1))
    se = diff.std(axis=1, ddof=1) / math.sqrt(M) if M > 1 else np.zeros_like(gaps)
    times = ra.record_times
    floor = dissipation_gap(params)
    peak = gaps.max() if gaps.size else 0.0
    ok = (gaps > SIGNAL_TO_NOISE * se) & (gaps > 1e-10 * peak) & (times > 0)
    if peak == 0.0 or ok.sum() < MIN_FIT_POINTS:
        return ErgodicFit(None, None, floor, times, gaps, se)
    # contiguous window from the first usable step
    idx = np.flatnonzero(ok)
    stop = idx[0]
    while stop + 1 < ok.size and ok[stop + 1]:
        stop += 1
    sel = slice(idx[0], stop + 1)
    fit = rate_regression(times[sel], np.log(gaps[sel]))
    if fit.indeterminate:
        return ErgodicFit(None, None, floor, times, gaps, se)
    return ErgodicFit(-fit.slope, fit.halfwidth, floor, times, gaps, se, (int(idx[0]), int(stop)))


@dataclass
class InvariantEstimate:
    time_average: float
    time_stderr: float
    ensemble_average: float
    ensemble_stderr: float
    gap: float
    gap_stderr: float
    burn_in_steps: int
    burn_in_short: bool = False


def invariant_measure_estimate(
    cfg: SchemeConfig,
    params: Optional[ModelParams],
    spectrum: NoiseSpectrum,
    functional: FunctionalSpec,
    burn_in: Optional[float],
    M: int,
    seed: int,
    u0=None,
    threads: int = 1,
    backend=None,
) -> InvariantEstimate:
    """Time average after burn-in versus the ensemble average at the final step.

    ``burn_in`` is in time units; ``None`` picks five mixing times
    5 / (lambda_1 - L_F). ``cfg.n_steps`` is the total run length.
    """
    _validate(params, spectrum, cfg.beta)
    mixing = 1.0 / dissipation_gap(params)
    if burn_in is None:
        burn_in = 5.0 * mixing
    short = burn_in < 5.0 * mixing - 1e-12
    if short:
        warnings.warn(f"burn-in {burn_in} is shorter than five mixing times ({5 * mixing:.4g})")
    if cfg.horizon < 2.0 * burn_in - 1e-12:
        raise PreconditionError("run length must be at least twice the burn-in")
    k0 = int(math.ceil(burn_in / cfg.tau - 1e-9))
    u0 = np.zeros(cfg.n_modes) if u0 is None else _coeffs(u0)
    disc = Discretization(cfg, params)
    res = run_ensemble(disc, cfg.n_steps, u0, spectrum, M, seed, record=functional.evaluate,
                       threads=threads, backend=backend)
    per_sample = res.records[k0 + 1:].mean(axis=0)
    t_mean, t_se = _mean_se(per_sample)
    e_mean, e_se = _mean_se(res.records[-1])
    gap = t_mean - e_mean
    return InvariantEstimate(t_mean, t_se, e_mean, e_se, gap, math.hypot(t_se, e_se), k0, short)
