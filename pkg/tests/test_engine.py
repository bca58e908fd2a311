import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sacesim import kernels
from sacesim.engine import Level, NoiseSource, chunks, run_batch, run_ensemble
from sacesim.errors import PreconditionError
from sacesim.noise import NoiseSpectrum, RngStream
from sacesim.operators import ModelParams
from sacesim.scheme import Discretization, SchemeConfig, initial_field, tamed_exp_euler_step
from sacesim.spectral import SpectralField

AC = ModelParams()
needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernel not built")


def _disc(N=16, tau=0.05, variant="tamed_exp_euler", params=AC, beta=1.0):
    return Discretization(SchemeConfig(N, tau, 1, beta, variant), params)


class TestBackends:
    def test_selection(self):
        assert kernels.BACKEND in ("python", "compiled")
        assert kernels.get_backend("python") is kernels.python_backend
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")

    def test_python_batch_matches_single_field(self):
        rng = np.random.default_rng(0)
        disc = _disc()
        V = rng.standard_normal((5, 16)) / np.arange(1, 17)
        W = 0.05 * rng.standard_normal((5, 16))
        out = kernels.python_backend.step_batch(V, W, disc)
        for i in range(5):
            ref = tamed_exp_euler_step(SpectralField(V[i]), AC, SpectralField(W[i]), disc.cfg, disc.grid)
            assert_array_equal(out[i], ref.coeffs)

    @needs_compiled
    @pytest.mark.parametrize("N", [1, 4, 16, 64])
    @pytest.mark.parametrize("variant", ["tamed_exp_euler", "untamed_exp_euler"])
    def test_compiled_agrees(self, N, variant):
        rng = np.random.default_rng(N)
        disc = _disc(N, 0.01, variant, ModelParams(0.1, 1.0, 0.5, 1.2), beta=0.7)
        V = 0.3 * rng.standard_normal((37, N)) / np.arange(1, N + 1)
        W = 0.01 * rng.standard_normal((37, N))
        a = kernels.python_backend.step_batch(V, W, disc)
        b = kernels.compiled_backend.step_batch(V, W, disc)
        assert_allclose(b, a, rtol=0, atol=1e-12)

    @needs_compiled
    def test_compiled_drift_free(self):
        disc = _disc(params=None)
        rng = np.random.default_rng(1)
        V, W = rng.standard_normal((3, 16)), rng.standard_normal((3, 16))
        assert_array_equal(kernels.compiled_backend.step_batch(V, W, disc), disc.decay * V + W)

    @needs_compiled
    def test_compiled_large_states_stay_finite(self):
        disc = _disc(8, 0.1)
        V = np.zeros((2, 8))
        V[:, 0] = [1e3, 1e6]
        out = kernels.compiled_backend.step_batch(V, np.zeros_like(V), disc)
        assert np.all(np.isfinite(out))
        assert_allclose(out, kernels.python_backend.step_batch(V, np.zeros_like(V), disc), rtol=1e-12, atol=1e-12)


class TestNoiseSource:
    def test_matches_per_sample_streams(self):
        src = NoiseSource(9, [3, 4], 5, block=4)
        draws = np.array([src.next() for _ in range(10)])  # (steps, B, N)
        for j, sid in enumerate([3, 4]):
            assert_array_equal(draws[:, j, :], RngStream(9, sid).normal((10, 5)))

    def test_chunks(self):
        parts = chunks(600, 256)
        assert [len(p) for p in parts] == [256, 256, 88]
        assert_array_equal(np.concatenate(parts), np.arange(600))


class TestEnsemble:
    spec = NoiseSpectrum.power_law(16, 1.0, 1.0)

    def test_thread_count_invariance(self):
        disc = _disc()
        u0 = initial_field("sine", 16).coeffs
        runs = [run_ensemble(disc, 10, u0, self.spec, 300, seed=4, threads=t, chunk=64) for t in (1, 3)]
        assert_array_equal(runs[0].final, runs[1].final)

    def test_sample_ids_are_global(self):
        disc = _disc()
        whole = run_ensemble(disc, 5, np.zeros(16), self.spec, 10, seed=4, chunk=4, backend="python")
        tail = run_ensemble(disc, 5, np.zeros(16), self.spec, 4, seed=4, first_sample=6, backend="python")
        assert_array_equal(whole.final[6:], tail.final)

    def test_records(self):
        disc = _disc()
        res = run_ensemble(disc, 10, np.zeros(16), self.spec, 7, seed=1, record=lambda V: V[:, 0], save_stride=5)
        assert res.records.shape == (3, 7)
        assert_allclose(res.record_times, [0, 0.25, 0.5])
        assert_array_equal(res.records[0], 0.0)
        assert_array_equal(res.records[-1], res.final[:, 0])

    def test_per_sample_initial_states(self):
        disc = _disc(params=None)
        u0 = np.arange(32.0).reshape(2, 16)
        res = run_ensemble(disc, 1, u0, self.spec, 2, seed=0)
        std = disc.noise_std(self.spec.q)
        for i in range(2):
            z = RngStream(0, i).normal(16)
            assert_allclose(res.final[i], disc.decay * u0[i] + std * z, rtol=1e-14, atol=1e-300)

    def test_drift_free_levels_exact(self):
        fine = Discretization(SchemeConfig(16, 0.01, 40), None)
        coarse = Discretization(SchemeConfig(8, 0.04, 10), None)
        res = run_ensemble(fine, 40, np.linspace(1, 0, 16), self.spec, 20, seed=2, levels=[Level(coarse, 4)])
        assert_allclose(res.level_finals[0], res.final[:, :8], rtol=0, atol=1e-12)

    def test_bad_level(self):
        fine = _disc()
        with pytest.raises(PreconditionError):
            run_batch(fine, 10, np.zeros(16), self.spec, 0, [0], levels=[Level(_disc(32), 2)])
        with pytest.raises(PreconditionError):
            run_batch(fine, 10, np.zeros(16), self.spec, 0, [0], levels=[Level(_disc(8), 3)])

    def test_blowup_marked_and_parked(self):
        disc = _disc(8, 0.1, "untamed_exp_euler")
        u0 = np.zeros((2, 8))
        u0[1, 0] = 1e3
        res = run_ensemble(disc, 10, u0, self.spec.with_modes(8), 2, seed=0)
        assert res.blowup_step[0] == -1
        assert 1 <= res.blowup_step[1] <= 10
        assert np.all(np.isfinite(res.final))

    def test_semi_implicit_batch(self):
        disc = Discretization(SchemeConfig(8, 0.05, 4, variant="semi_implicit"), AC)
        res = run_ensemble(disc, 4, initial_field("sine", 8).coeffs, self.spec.with_modes(8), 5, seed=3)
        assert np.all(np.isfinite(res.final))
