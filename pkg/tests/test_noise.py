import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sacesim.errors import DomainError, PreconditionError
from sacesim.noise import (
    BoundaryRegularityWarning,
    NoiseSpectrum,
    RngStream,
    convolution_increment,
    convolution_variances,
    refine_coupling,
    regularity_check,
    stationary_convolution_sample,
    wiener_increment,
)
from sacesim.spectral import SpectralField, eigenvalues

# frozen with mpmath at 30 digits
VAR_MODE1_TAU_TENTH = 0.0436232716056054375
STATIONARY_MODE1 = 0.0506605918211688857
STATIONARY_MODE2 = 0.0126651479552922214


class TestSpectrum:
    def test_power_law_q(self):
        assert_allclose(NoiseSpectrum.power_law(4, 1.0).q, [1, 1 / 4, 1 / 9, 1 / 16])

    def test_white_q(self):
        assert_array_equal(NoiseSpectrum.white(5).q, np.ones(5))

    def test_q_nonincreasing_positive(self):
        q = NoiseSpectrum.power_law(100, 0.75, 1.0).q
        assert np.all(q > 0) and np.all(np.diff(q) <= 0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="pink", decay=1.0, beta=1.0, n_modes=4),
            dict(kind="power_law", decay=-1.0, beta=1.0, n_modes=4),
            dict(kind="power_law", decay=1.0, beta=0.0, n_modes=4),
            dict(kind="white", decay=1.0, beta=0.5, n_modes=4),
            dict(kind="power_law", decay=1.0, beta=1.0, n_modes=0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            NoiseSpectrum(**kwargs)


class TestRegularity:
    def test_white_boundary(self):
        with pytest.warns(BoundaryRegularityWarning):
            res = regularity_check(NoiseSpectrum.white(16, 0.5))
        assert res.admissible and res.at_boundary

    def test_trace_class(self):
        res = regularity_check(NoiseSpectrum.power_law(16, 1.0, 1.0))
        assert res.admissible and not res.at_boundary
        assert res.tail_exponent == -2.0
        assert res.partial_sum == pytest.approx(np.sum(1.0 / np.arange(1, 17) ** 2))

    def test_white_beta_one(self):
        res = regularity_check(NoiseSpectrum.white(16, 1.0))
        assert not res.admissible
        assert res.partial_sum == pytest.approx(16.0)

    def test_white_below_boundary(self):
        assert regularity_check(NoiseSpectrum.white(16, 0.4)).admissible


class TestRng:
    def test_reproducible(self):
        a = RngStream(42, 7).normal(100)
        b = RngStream(42, 7).normal(100)
        assert_array_equal(a, b)

    def test_block_draws_match(self):
        whole = RngStream(1, 3).normal((6, 4))
        s = RngStream(1, 3)
        parts = np.vstack([s.normal((2, 4)), s.normal((4, 4))])
        assert_array_equal(whole, parts)

    def test_streams_differ(self):
        a = RngStream(42, 0).normal(1000)
        b = RngStream(42, 1).normal(1000)
        c = RngStream(43, 0).normal(1000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(1000)
        assert abs(np.corrcoef(a, c)[0, 1]) < 4 / math.sqrt(1000)

    def test_purpose_separates(self):
        a = RngStream(5, 0, purpose=0).normal(10)
        b = RngStream(5, 0, purpose=1).normal(10)
        assert not np.array_equal(a, b)

    def test_large_seed(self):
        RngStream(2**64 - 1, 2**63).normal(3)


class TestConvolution:
    def test_variance_mode1(self):
        assert convolution_variances(np.ones(1), 0.1)[0] == pytest.approx(VAR_MODE1_TAU_TENTH, rel=1e-14)

    def test_stationary_limit(self):
        v = convolution_variances(np.ones(2), math.inf)
        assert_allclose(v, [STATIONARY_MODE1, STATIONARY_MODE2], rtol=1e-14)
        assert_allclose(convolution_variances(np.ones(2), 10.0), v, rtol=1e-14)

    def test_zero_q(self):
        assert_array_equal(convolution_variances(np.zeros(3), 0.1), 0.0)

    def test_bad_tau(self):
        with pytest.raises(DomainError):
            convolution_variances(np.ones(2), 0.0)

    def test_sample_variance(self):
        spec = NoiseSpectrum.power_law(4, 1.0)
        rng = RngStream(11, 0)
        n = 200_000
        draws = np.array([convolution_increment(spec, 0.1, rng).coeffs for _ in range(n // 100)])
        # vectorised block for the bulk: same law, same stream
        std = np.sqrt(convolution_variances(spec.q, 0.1))
        draws = np.vstack([draws, std * rng.normal((n, 4))])
        exact = convolution_variances(spec.q, 0.1)
        se = exact * math.sqrt(2.0 / (len(draws) - 1))
        assert np.all(np.abs(draws.var(axis=0, ddof=1) - exact) < 3 * se)
        corr = np.corrcoef(draws.T)[np.triu_indices(4, 1)]
        assert np.all(np.abs(corr) < 4 / math.sqrt(len(draws)))

    def test_deterministic(self):
        spec = NoiseSpectrum.power_law(4, 1.0)
        a = convolution_increment(spec, 0.1, RngStream(9, 2)).coeffs
        b = convolution_increment(spec, 0.1, RngStream(9, 2)).coeffs
        assert_array_equal(a, b)

    def test_wiener_increment_variance(self):
        spec = NoiseSpectrum.power_law(3, 1.0)
        rng = RngStream(2, 0)
        draws = np.array([wiener_increment(spec, 0.01, rng).coeffs for _ in range(20000)])
        exact = spec.q * 0.01
        assert np.all(np.abs(draws.var(axis=0, ddof=1) - exact) < 4 * exact * math.sqrt(2 / 19999))


class TestRefineCoupling:
    def test_single_identity(self):
        inc = SpectralField([0.3, -0.1])
        assert_array_equal(refine_coupling([inc], 0.01).coeffs, inc.coeffs)

    def test_zero(self):
        out = refine_coupling([SpectralField.zeros(3)] * 4, 0.01)
        assert_array_equal(out.coeffs, 0.0)

    def test_empty(self):
        with pytest.raises(PreconditionError):
            refine_coupling([], 0.01)

    def test_mismatched(self):
        with pytest.raises(PreconditionError):
            refine_coupling([SpectralField.zeros(2), SpectralField.zeros(3)], 0.01)

    def test_two_step_variance_identity(self):
        lam = eigenvalues(8)
        tf = 0.013
        sf = convolution_variances(np.ones(8), tf)
        assert_allclose(np.exp(-2 * lam * tf) * sf + sf, convolution_variances(np.ones(8), 2 * tf), rtol=1e-14)

    def test_r_step_variance(self):
        spec = NoiseSpectrum.power_law(3, 1.0)
        rng = RngStream(4, 0)
        tf, r = 0.01, 5
        draws = np.array(
            [refine_coupling([convolution_increment(spec, tf, rng) for _ in range(r)], tf).coeffs for _ in range(8000)]
        )
        exact = convolution_variances(spec.q, r * tf)
        assert np.all(np.abs(draws.var(axis=0, ddof=1) - exact) < 4 * exact * math.sqrt(2 / 7999))

    def test_weights(self):
        lam = eigenvalues(2)
        tf = 0.02
        incs = [SpectralField([1.0, 0.0]), SpectralField([0.0, 1.0]), SpectralField([2.0, 2.0])]
        out = refine_coupling(incs, tf).coeffs
        expected = np.array([math.exp(-2 * lam[0] * tf) + 2.0, math.exp(-lam[1] * tf) + 2.0])
        assert_allclose(out, expected, rtol=1e-15)


class TestStationary:
    def test_variance(self):
        spec = NoiseSpectrum.power_law(2, 0.0 + 1e-300 * 0, 1.0)
        # q = 1 on both modes
        spec = NoiseSpectrum.white(2, 0.4)
        draws = np.array([stationary_convolution_sample(spec, RngStream(8, i)).coeffs for i in range(20000)])
        exact = np.array([STATIONARY_MODE1, STATIONARY_MODE2])
        assert np.all(np.abs(draws.var(axis=0, ddof=1) - exact) < 4 * exact * math.sqrt(2 / 19999))

    def test_inadmissible(self):
        with pytest.raises(DomainError):
            stationary_convolution_sample(NoiseSpectrum.white(4, 1.0), RngStream(0))
