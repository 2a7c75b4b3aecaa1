"""Forced oscillator benchmark: RK4 oracle and dataset generation."""

import dataclasses

import numpy as np
import pytest

import pnlss as P


def cubic_equilibrium(params, u0):
    """Real root of alpha*y + beta*y^3 = u0 nearest the origin."""
    roots = np.roots([params.beta, 0.0, params.alpha, -u0])
    real = roots[np.abs(roots.imag) < 1e-9].real
    return real[np.argmin(np.abs(real))]


def multisine_period(seed=3, rms=50.0, n_samples=None):
    cfg = P.default_train_config(rms=rms, seed=seed)
    sig = P.generate_multisine(cfg)[0]
    period = sig.samples[:cfg.n_samples]
    return period if n_samples is None else period[:n_samples]


class TestSimulateDuffing:
    def test_linear_resonator_matches_continuous_frf(self):
        # with the band far below Nyquist the zero-order-hold bias
        # (about pi*f/fs relative) stays inside the 0.5% budget
        pars = P.DuffingParams(beta=0.0, noise_std=0.0, fs=8192.0)
        N = 8192
        cfg = P.MultisineConfig(n_samples=N, fs=8192.0, grid="odd",
                                f_max_ratio=12 / 4096, realizations=1,
                                periods=1, rms=1.0, seed=5)
        sig = P.generate_multisine(cfg)[0]
        settle = 6
        y = P.simulate_duffing(pars, np.tile(sig.samples[:N], settle + 1),
                               substeps=20)
        k = sig.excited_lines
        U = np.fft.fft(sig.samples[:N])[k]
        Y = np.fft.fft(y[settle * N:])[k]
        w = 2.0 * np.pi * k * pars.fs / N
        G_true = 1.0 / (pars.alpha + 1j * pars.damping * w - pars.mass * w**2)
        rel = np.abs(Y / U - G_true) / np.abs(G_true)
        assert rel.max() < 0.005

    def test_constant_input_settles_at_cubic_equilibrium(self):
        pars = P.DuffingParams(noise_std=0.0)
        u0 = 50.0
        y = P.simulate_duffing(pars, np.full(4096, u0), substeps=10)
        assert abs(y[-1] - cubic_equilibrium(pars, u0)) < 1e-6

    def test_step_halving_is_fourth_order(self):
        pars = P.DuffingParams(noise_std=0.0)
        u = multisine_period(n_samples=512)
        y_ref = P.simulate_duffing(pars, u, substeps=160)
        e_coarse = np.max(np.abs(P.simulate_duffing(pars, u, substeps=5) - y_ref))
        e_fine = np.max(np.abs(P.simulate_duffing(pars, u, substeps=10) - y_ref))
        assert 8.0 < e_coarse / e_fine < 32.0

    def test_noiseless_oracle_is_deterministic(self):
        pars = P.DuffingParams(noise_std=0.0)
        u = multisine_period(n_samples=256)
        np.testing.assert_array_equal(P.simulate_duffing(pars, u),
                                      P.simulate_duffing(pars, u))

    def test_beta_zero_scales_linearly(self):
        # doubling is an exponent shift, so the linear recursion doubles
        # bit for bit
        pars = P.DuffingParams(beta=0.0, noise_std=0.0)
        u = multisine_period(n_samples=256)
        y1 = P.simulate_duffing(pars, u)
        y2 = P.simulate_duffing(pars, 2.0 * u)
        np.testing.assert_array_equal(y2, 2.0 * y1)

    def test_output_noise_is_seeded(self):
        clean = P.DuffingParams(noise_std=0.0)
        noisy = P.DuffingParams(noise_std=1e-5, seed=7)
        u = multisine_period(n_samples=2048)
        y0 = P.simulate_duffing(clean, u)
        y1 = P.simulate_duffing(noisy, u)
        np.testing.assert_array_equal(P.simulate_duffing(noisy, u), y1)
        resid = y1 - y0
        assert 0.5e-5 < resid.std() < 2e-5

    def test_softening_spring_divergence_reports_sample(self):
        pars = P.DuffingParams(beta=-3.7e9, noise_std=0.0)
        with pytest.raises(P.DivergenceError) as info:
            P.simulate_duffing(pars, np.full(2048, 500.0))
        assert info.value.sample_index >= 0

    def test_input_validation(self):
        pars = P.DuffingParams()
        with pytest.raises(P.ConfigurationError):
            P.simulate_duffing(pars, np.ones(16), substeps=0)
        with pytest.raises(P.ConfigurationError):
            P.simulate_duffing(pars, np.array([1.0, np.nan]))

    def test_params_validation(self):
        with pytest.raises(P.ConfigurationError):
            P.DuffingParams(mass=0.0)
        with pytest.raises(P.ConfigurationError):
            P.DuffingParams(damping=-1.0)
        with pytest.raises(P.ConfigurationError):
            P.DuffingParams(fs=0.0)
        with pytest.raises(P.ConfigurationError):
            P.DuffingParams(noise_std=-1e-6)


class TestDefaultTrainConfig:
    def test_excites_150_odd_lines_to_149_5_hz(self):
        cfg = P.default_train_config()
        assert (cfg.n_samples, cfg.fs) == (2048, 1024.0)
        sig = P.generate_multisine(cfg)[0]
        np.testing.assert_array_equal(sig.excited_lines, np.arange(1, 300, 2))
        assert sig.excited_lines.max() * cfg.fs / cfg.n_samples == 149.5


class TestMakeBenchmark:
    def test_training_record_shape_and_meta(self, duffing_benchmark):
        params, train, validation = duffing_benchmark
        assert train.u.shape == (4, 4, 2048, 1)
        assert train.y.shape == (4, 4, 2048, 1)
        assert train.periodic
        assert train.meta["alpha"] == params.alpha
        assert train.meta["beta"] == params.beta
        assert train.meta["rms"] == 50.0
        assert np.all(train.excited_lines % 2 == 1)

    def test_retained_periods_are_steady_state(self):
        params = P.DuffingParams(noise_std=0.0)
        cfg = dataclasses.replace(P.default_train_config(), realizations=2,
                                  periods=2)
        train, _ = P.make_benchmark(params, cfg)
        for r in range(2):
            y = train.y[r, :, :, 0]
            spread = np.max(np.abs(y - y.mean(axis=0)))
            assert spread < 1e-6 * np.sqrt(np.mean(y**2))

    def test_validation_amplitude_ramps_linearly(self, duffing_benchmark):
        params, train, validation = duffing_benchmark
        uv = validation.u[:, 0]
        window = 512
        centers, levels = [], []
        for s in range(0, uv.size - window + 1, window):
            centers.append((s + window / 2) / params.fs)
            levels.append(np.sqrt(np.mean(uv[s:s + window] ** 2)))
        slope = np.polyfit(centers, levels, 1)[0]
        expected = (1.4 * 50.0 - 0.1 * 50.0) / (uv.size / params.fs)
        assert slope == pytest.approx(expected, rel=0.10)
        # the top of the ramp probes beyond the training level
        assert max(levels) > 50.0

    def test_validation_masks_its_transient(self, duffing_benchmark):
        _, _, validation = duffing_benchmark
        assert validation.t2 == 256
        mask = validation.cost_mask()
        assert not mask[:256].any()
        assert mask[256:].all()
        assert validation.meta.get("amplitude_growth") == (5.0, 70.0)

    def test_sampling_rate_mismatch_rejected(self):
        params = P.DuffingParams(fs=512.0)
        with pytest.raises(P.ConfigurationError):
            P.make_benchmark(params, P.default_train_config())

    def test_divergence_suggests_lowering_the_level(self):
        params = P.DuffingParams(beta=-3.7e9, noise_std=0.0)
        cfg = dataclasses.replace(P.default_train_config(rms=500.0),
                                  realizations=1, periods=1)
        with pytest.raises(P.NumericalError, match="lower"):
            P.make_benchmark(params, cfg)


class TestOraclePhysics:
    def test_cubic_spring_distorts_odd_lines_only(self):
        cfg = dataclasses.replace(
            P.default_train_config(seed=9, grid="random-odd"),
            realizations=2, periods=2)
        train, _ = P.make_benchmark(P.DuffingParams(noise_std=0.0), cfg)
        spectrum = P.classify_distortions(train)
        odd = np.array([c is P.LineClass.UNEXCITED_ODD
                        for c in spectrum.line_class])
        even = np.array([c is P.LineClass.UNEXCITED_EVEN
                         for c in spectrum.line_class])
        assert odd.any() and even.any()
        odd_level = spectrum.level[odd].mean()
        even_level = spectrum.level[even].mean()
        if even_level > 0:
            assert odd_level >= 50.0 * even_level
        assert odd_level > 0
