"""Fast oracle suite behind ``sacesim self-test``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .noise import NoiseSpectrum, RngStream, convolution_variances, refine_coupling
from .operators import (
    ModelParams,
    phi_multipliers,
    semigroup_apply,
    taming_factor,
)
from .oracles import ou_variance
from .scheme import Discretization, SchemeConfig, run_coupled_pair
from .engine import run_ensemble
from .spectral import (
    CollocationGrid,
    SpectralField,
    eigenvalues,
    to_physical,
    to_spectral,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _random_fields(rng, n, count, decay=1.0):
    k = np.arange(1, n + 1)
    return rng.standard_normal((count, n)) * k**-decay


def check_round_trip(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 65))
        grid = CollocationGrid(int(rng.integers(n, 4 * n + 8)))
        v = SpectralField(rng.standard_normal(n))
        back = to_spectral(to_physical(v, grid), grid, n)
        worst = max(worst, float(np.max(np.abs(back.coeffs - v.coeffs))))
    return CheckResult("transform round trip", worst <= 1e-12, f"max error {worst:.2e} (tol 1e-12)")


def check_semigroup(rng):
    worst = 0.0
    for c in _random_fields(rng, 32, 50):
        v = SpectralField(c)
        s, t = rng.uniform(0, 0.05, size=2)
        a = semigroup_apply(semigroup_apply(v, s), t).coeffs
        b = semigroup_apply(v, s + t).coeffs
        worst = max(worst, float(np.max(np.abs(a - b))))
    return CheckResult("semigroup composition", worst <= 1e-13, f"max error {worst:.2e} (tol 1e-13)")


def check_phi_identity(rng):
    lam = eigenvalues(256)
    worst = 0.0
    for tau in np.concatenate([rng.uniform(1e-6, 1.0, 20), [1e-12, 1e-3, 1.0]]):
        lhs = lam * phi_multipliers(256, tau) + np.exp(-lam * tau)
        worst = max(worst, float(np.max(np.abs(lhs - 1.0))))
    return CheckResult("phi-operator identity", worst <= 1e-14, f"max error {worst:.2e} (tol 1e-14)")


def check_one_sided_lipschitz(rng):
    grid = CollocationGrid.for_modes(16)
    violations = 0
    for i in range(1000):
        a = rng.normal(size=4)
        params = ModelParams(a[0], a[1], a[2], abs(a[3]) + 0.1)
        u, v = (to_physical(SpectralField(c), grid) for c in _random_fields(rng, 16, 2, 0.5))
        d = u - v
        lhs = float(np.sum(d * (params.f(u) - params.f(v))))
        rhs = params.lipschitz_onesided * float(np.sum(d * d))
        if lhs > rhs + 1e-10 * (1.0 + abs(rhs)):
            violations += 1
    return CheckResult("one-sided Lipschitz", violations == 0, f"{violations} violations in 1000 pairs")


def check_taming(rng):
    grid = CollocationGrid.for_modes(16)
    ok = taming_factor(SpectralField.zeros(16), 0.1, 1.0, grid) == 1.0
    for c in _random_fields(rng, 16, 200):
        v = SpectralField(c)
        g1 = taming_factor(v, 0.1, 0.7, grid)
        g2 = taming_factor(2.0 * v, 0.1, 0.7, grid)
        ok &= 0.0 < g2 < g1 <= 1.0
    return CheckResult("taming factor bounds", bool(ok), "0 < G <= 1, strictly decreasing under scaling")


def check_ou_variance(rng):
    N, tau, K, M = 8, 0.1, 20, 20000
    spec = NoiseSpectrum.power_law(N, 1.0, 1.0)
    disc = Discretization(SchemeConfig(N, tau, K, 1.0), None)
    res = run_ensemble(disc, K, np.zeros(N), spec, M, seed=7)
    var = res.final.var(axis=0, ddof=1)
    exact = ou_variance(spec.q, K * tau)
    z = np.abs(var - exact) / (exact * math.sqrt(2.0 / (M - 1)))
    return CheckResult("drift-free OU variances", bool(np.all(z < 4)), f"max |z| = {z.max():.2f} (< 4)")


def check_coupling(rng):
    fine = SchemeConfig(16, 0.01, 64, 1.0)
    coarse = SchemeConfig(8, 0.08, 8, 1.0)
    spec = NoiseSpectrum.power_law(16, 1.0, 1.0)
    u0 = SpectralField(_random_fields(rng, 16, 1)[0])
    Vc, Vf = run_coupled_pair(coarse, fine, None, spec, u0, RngStream(3, 0))
    err = float(np.max(np.abs(Vc.coeffs - Vf.coeffs[:8])))
    return CheckResult("drift-free coupling", err <= 1e-12, f"coarse vs fine max gap {err:.2e}")


def check_refine_variance(rng):
    tau_f = 0.05
    s_f = convolution_variances(np.ones(4), tau_f)
    s_c = convolution_variances(np.ones(4), 2 * tau_f)
    combined = np.exp(-2 * eigenvalues(4) * tau_f) * s_f + s_f
    err = float(np.max(np.abs(combined - s_c)))
    single = SpectralField(rng.standard_normal(4))
    ident = np.array_equal(refine_coupling([single], tau_f).coeffs, single.coeffs)
    return CheckResult("refine coupling algebra", err <= 1e-14 and ident, f"variance identity error {err:.2e}")


def check_backends(rng):
    if kernels.compiled_backend is None:
        return CheckResult("backend agreement", True, "compiled kernel not built; skipped")
    disc = Discretization(SchemeConfig(32, 0.05, 1, 1.0), ModelParams(0.3, 1.0, 0.5, 1.0))
    V = 0.1 * _random_fields(rng, 32, 64)
    W = 0.01 * rng.standard_normal((64, 32))
    a = kernels.python_backend.step_batch(V, W, disc)
    b = kernels.compiled_backend.step_batch(V, W, disc)
    err = float(np.max(np.abs(a - b)))
    return CheckResult("backend agreement", err <= 1e-12, f"python vs compiled {err:.2e}")


CHECKS = [
    check_round_trip,
    check_semigroup,
    check_phi_identity,
    check_one_sided_lipschitz,
    check_taming,
    check_ou_variance,
    check_coupling,
    check_refine_variance,
    check_backends,
]


def run_all(seed: int = 2024):
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    results = [check(rng) for check in CHECKS]
    return results, time.perf_counter() - start
