import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmotion.errors import DataError
from specmotion.normalize import NormalizationStats, denormalize
from specmotion.sampling import (
    GENERATION_DEFAULTS,
    LOOPING_DEFAULTS,
    GaussianOracleDenoiser,
    GuidanceConfig,
    LatentBatch,
    NoiseSchedule,
    ddim_step,
    decode_loop_loss,
    guided_epsilon,
    latent_to_volume,
    loop_gradient,
    loop_loss,
    predict_clean,
    reshape_for_frequency,
    reshape_for_spatial,
    sample_looping,
    volume_to_latent,
)
from specmotion.spectral import MotionTexture, ifft_inverse


SCHED = NoiseSchedule.cosine(1000)


def make_stats(K, scale, T, fps=30.0):
    return NormalizationStats(
        scales=np.full(K, float(scale)),
        frequencies=np.arange(1, K + 1) * fps / T,
        percentile=0.95,
        sample_count=1,
    )


class TestNoiseSchedule:
    def test_cosine_endpoints_and_monotonicity(self):
        sched = NoiseSchedule.cosine(1000)
        assert sched.alpha_bar[0] == 1.0
        assert sched.alpha_bar[-1] > 0
        assert np.all(np.diff(sched.alpha_bar) < 0)
        sigmas = [sched.sigma(n) for n in range(0, 1001, 50)]
        assert sigmas[0] == 0.0
        assert all(a < b for a, b in zip(sigmas, sigmas[1:]))

    def test_levels_grid(self):
        cfg = GuidanceConfig(steps=500, schedule=SCHED)
        levels = cfg.levels()
        assert levels[0] == 1000 and levels[-1] == 0
        assert len(levels) == 501
        assert np.all(np.diff(levels) < 0)


class TestReshapeContract:
    def test_roundtrip_identity(self):
        rng = np.random.default_rng(0)
        arr = rng.normal(size=(2, 3, 4, 5, 6))
        back = reshape_for_frequency(reshape_for_spatial(arr), num_bands=3)
        np.testing.assert_array_equal(back, arr)

    def test_index_arithmetic(self):
        arr = np.zeros((2, 3, 1, 1, 1))
        arr[1, 1, 0, 0, 0] = 7.0
        spatial = reshape_for_spatial(arr)
        assert spatial.shape == (6, 1, 1, 1)
        assert spatial[4, 0, 0, 0] == 7.0  # entry b*K + k = 1*3 + 1

    def test_single_band_degenerate(self):
        rng = np.random.default_rng(1)
        arr = rng.normal(size=(4, 1, 2, 3, 3))
        spatial = reshape_for_spatial(arr)
        assert spatial.shape == (4, 2, 3, 3)
        np.testing.assert_array_equal(spatial, arr[:, 0])

    def test_inconsistent_metadata_rejected(self):
        with pytest.raises(DataError):
            reshape_for_frequency(np.zeros((7, 2, 2, 2)), num_bands=3)
        with pytest.raises(DataError):
            reshape_for_spatial(np.zeros((2, 3, 4, 5)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3))
    def test_roundtrip_property(self, b, k, c):
        rng = np.random.default_rng(b * 100 + k * 10 + c)
        arr = rng.normal(size=(b, k, c, 2, 2))
        back = reshape_for_frequency(reshape_for_spatial(arr), num_bands=k)
        np.testing.assert_array_equal(back, arr)


class TestLoopLoss:
    def test_periodic_texture_has_zero_loss(self):
        T, h, w = 13, 3, 3
        rng = np.random.default_rng(2)
        base = rng.normal(size=(h, w, 2))
        # period divides T-1, so F_1 = F_T and forward differences match
        data = np.stack(
            [np.sin(2 * np.pi * (t - 1) / (T - 1)) * base for t in range(1, T + 1)]
        )
        assert loop_loss(MotionTexture(data=data)) == pytest.approx(0.0, abs=1e-12)

    def test_direct_summation(self):
        T, h, w = 5, 10, 10
        data = np.zeros((T, h, w, 2))
        data[-1, :, :, 0] = 1.0
        data[-2, :, :, 0] = 1.0  # velocity at the end = 0, matching the start
        assert loop_loss(MotionTexture(data=data)) == pytest.approx(100.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        tex = MotionTexture(data=rng.normal(size=(6, 3, 4, 2)))
        f = tex.data
        brute = 0.0
        for y in range(3):
            for x in range(4):
                for ax in range(2):
                    brute += abs(f[-1, y, x, ax] - f[0, y, x, ax])
                    brute += abs(
                        (f[-1, y, x, ax] - f[-2, y, x, ax])
                        - (f[1, y, x, ax] - f[0, y, x, ax])
                    )
        assert loop_loss(tex) == pytest.approx(brute, abs=1e-6)

    def test_non_negative(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            tex = MotionTexture(data=rng.normal(size=(4, 2, 2, 2)))
            assert loop_loss(tex) >= 0

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            loop_loss(MotionTexture(data=np.zeros((1, 2, 2, 2))))


class TestDecodeChain:
    def test_latent_volume_roundtrip(self):
        rng = np.random.default_rng(5)
        latent = rng.normal(size=(3, 4, 2, 2))
        vol = latent_to_volume(latent, num_frames=16, fps=30.0)
        np.testing.assert_array_equal(volume_to_latent(vol), latent)

    def test_decode_loss_matches_module_composition(self):
        # independent path: denormalize via the normalization module, invert
        # via the spectral module, then loop_loss
        rng = np.random.default_rng(6)
        K, T = 3, 20
        latent = rng.normal(size=(K, 4, 2, 2))
        stats = make_stats(K, 2.5, T)
        direct = decode_loop_loss(latent, stats, T)
        vol = latent_to_volume(latent, num_frames=T, fps=30.0)
        tex = ifft_inverse(denormalize(vol, stats), T)
        assert direct == pytest.approx(loop_loss(tex), rel=1e-10)

    def test_toy_gradient_matches_hand_derivation(self):
        # 1 pixel, 2 bands, T=8: chain is c = sign(z) z^2 s, then
        # F_t = (2/T) sum_k [Re(c) cos(w_k m) - Im(c) sin(w_k m)], m = t-1,
        # then the L1 loop loss; composed derivative written out by hand
        T, K = 8, 2
        stats = NormalizationStats(
            scales=np.array([2.0, 3.0]),
            frequencies=np.array([1.0, 2.0]),
            percentile=0.95,
            sample_count=1,
        )
        z = np.array(
            [[[[[0.7]], [[-0.4]], [[0.5]], [[0.9]]],
              [[[0.3]], [[0.8]], [[-0.6]], [[0.2]]]]]
        )
        zk = z[0, :, :, 0, 0]
        s = stats.scales
        c = np.sign(zk) * zk**2 * s[:, None]
        wk = 2 * np.pi * np.arange(1, K + 1) / T

        def field(m):
            co, si = np.cos(wk * m), np.sin(wk * m)
            return np.array(
                [
                    (2 / T) * np.sum(c[:, 0] * co - c[:, 1] * si),
                    (2 / T) * np.sum(c[:, 2] * co - c[:, 3] * si),
                ]
            )

        def dfield(m):
            co, si = np.cos(wk * m), np.sin(wk * m)
            d = np.zeros((K, 4, 2))
            d[:, 0, 0] = (2 / T) * co
            d[:, 1, 0] = -(2 / T) * si
            d[:, 2, 1] = (2 / T) * co
            d[:, 3, 1] = -(2 / T) * si
            return d

        f1, f2, fm1, ft = field(0), field(1), field(T - 2), field(T - 1)
        s_pos = np.sign(ft - f1)
        s_vel = np.sign((ft - fm1) - (f2 - f1))
        dl_dc = np.zeros((K, 4))
        for ax in range(2):
            dl_dc += s_pos[ax] * (dfield(T - 1)[:, :, ax] - dfield(0)[:, :, ax])
            dl_dc += s_vel[ax] * (
                (dfield(T - 1)[:, :, ax] - dfield(T - 2)[:, :, ax])
                - (dfield(1)[:, :, ax] - dfield(0)[:, :, ax])
            )
        hand = dl_dc * (2 * np.abs(zk) * s[:, None])

        fd = loop_gradient(z, stats, T, fd_step=1e-3)[0, :, :, 0, 0]
        rel = np.abs(fd - hand) / np.maximum(np.abs(hand), 1e-12)
        assert rel.max() < 1e-4

    def test_gradient_block_subsampling(self):
        rng = np.random.default_rng(7)
        K, T = 2, 16
        z = rng.normal(size=(1, K, 4, 2, 2))
        stats = make_stats(K, 1.0, T)
        full = loop_gradient(z, stats, T)
        block = np.array([0, 5, 9])
        partial = loop_gradient(z, stats, T, block=block)
        flat_full = full[0].reshape(-1)
        flat_part = partial[0].reshape(-1)
        np.testing.assert_allclose(flat_part[block], flat_full[block], rtol=1e-9)
        mask = np.ones(flat_full.size, bool)
        mask[block] = False
        assert np.all(flat_part[mask] == 0)


class TestGuidedEpsilon:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.mu_c = rng.normal(size=(1, 2, 4, 2, 2))
        self.mu_u = rng.normal(size=(1, 2, 4, 2, 2))
        self.oracle = GaussianOracleDenoiser(
            mean=self.mu_c, schedule=SCHED, data_std=0.3, mean_uncond=self.mu_u
        )
        self.z = rng.normal(size=(1, 2, 4, 2, 2))

    def test_raw_conditional_when_unguided(self):
        cfg = GuidanceConfig(w=0.0, u=0.0, steps=10, schedule=SCHED)
        out = guided_epsilon(self.z, 500, self.oracle, "c", cfg)
        np.testing.assert_array_equal(out, self.oracle(self.z, 500, "c"))

    def test_classifier_free_extrapolation(self):
        cfg = GuidanceConfig(w=1.75, u=0.0, steps=10, schedule=SCHED)
        out = guided_epsilon(self.z, 500, self.oracle, "c", cfg)
        expected = 2.75 * self.oracle(self.z, 500, "c") - 1.75 * self.oracle(
            self.z, 500, None
        )
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_affine_in_loop_gradient(self):
        cfg = GuidanceConfig(w=0.5, u=200.0, steps=10, schedule=SCHED)
        rng = np.random.default_rng(9)
        g = rng.normal(size=self.z.shape)
        base = guided_epsilon(self.z, 400, self.oracle, "c", cfg, np.zeros_like(g))
        out = guided_epsilon(self.z, 400, self.oracle, "c", cfg, g)
        np.testing.assert_allclose(out - base, 200.0 * SCHED.sigma(400) * g, rtol=1e-10)

    def test_paper_default_weights(self):
        assert LOOPING_DEFAULTS.w == 1.75
        assert LOOPING_DEFAULTS.u == 200.0
        assert LOOPING_DEFAULTS.steps == 500
        assert LOOPING_DEFAULTS.recurrence == 2
        assert GENERATION_DEFAULTS.steps == 250

    def test_mismatched_gradient_rejected(self):
        cfg = GuidanceConfig(w=0.0, u=1.0, steps=10, schedule=SCHED)
        with pytest.raises(DataError):
            guided_epsilon(self.z, 400, self.oracle, "c", cfg, np.zeros((1, 1, 4, 2, 2)))


class TestDdimStep:
    def setup_method(self):
        rng = np.random.default_rng(10)
        self.mu = rng.normal(size=(1, 2, 4, 2, 2)) * 0.5
        self.oracle = GaussianOracleDenoiser(mean=self.mu, schedule=SCHED, data_std=0.2)
        self.cfg = GuidanceConfig(w=0.0, u=0.0, steps=100, schedule=SCHED)
        self.z = rng.normal(size=(1, 2, 4, 2, 2))

    def test_terminal_level_returns_unchanged(self):
        batch = LatentBatch(data=self.z, n=0)
        out = ddim_step(batch, self.oracle, "c", self.cfg)
        assert out is batch

    def test_matches_plain_ddim_formula_bitwise(self):
        n = 1000
        batch = LatentBatch(data=self.z, n=n)
        out = ddim_step(batch, self.oracle, "c", self.cfg)
        abar = SCHED.alpha_bar
        n_next = int(self.cfg.levels()[1])
        eps = self.oracle(self.z, n, "c")
        x0 = np.clip((self.z - np.sqrt(1 - abar[n]) * eps) / np.sqrt(abar[n]), -3, 3)
        expected = np.sqrt(abar[n_next]) * x0 + np.sqrt(1 - abar[n_next]) * eps
        np.testing.assert_array_equal(out.data, expected)
        assert out.n == n_next

    def test_off_grid_level_rejected(self):
        batch = LatentBatch(data=self.z, n=777)  # not on the 100-step grid
        with pytest.raises(DataError):
            ddim_step(batch, self.oracle, "c", self.cfg)

    def test_oracle_convergence_to_mean(self):
        # zero-variance oracle: the full run must land on the mean
        oracle = GaussianOracleDenoiser(mean=self.mu, schedule=SCHED, data_std=0.0)
        for steps in (50, 100):
            cfg = GuidanceConfig(w=0.0, u=0.0, steps=steps, schedule=SCHED)
            levels = cfg.levels()
            batch = LatentBatch(data=self.z, n=int(levels[0]))
            while batch.n > 0:
                batch = ddim_step(batch, oracle, "c", cfg)
            np.testing.assert_allclose(batch.data, self.mu, atol=1e-3)


class TestSampleLooping:
    def setup(self, seed=7):
        rng = np.random.default_rng(42)
        K, H, W, T = 2, 2, 2, 16
        mu = rng.uniform(0.3, 0.9, size=(1, K, 4, H, W)) * np.sign(
            rng.normal(size=(1, K, 4, H, W))
        )
        stats = make_stats(K, 4.0, T)
        oracle = GaussianOracleDenoiser(mean=mu, schedule=SCHED, data_std=0.5)
        return oracle, stats, (1, K, 4, H, W), T

    def run_loss(self, u, seed, steps=500, recurrence=2):
        oracle, stats, shape, T = self.setup()
        cfg = GuidanceConfig(w=1.75, u=u, steps=steps, recurrence=recurrence,
                             schedule=SCHED)
        vol = sample_looping(oracle, "img", cfg, shape, stats, T, seed=seed)
        return decode_loop_loss(volume_to_latent(vol), stats, T)

    def test_guidance_reduces_loop_loss_by_20_percent(self):
        unguided = self.run_loss(0.0, seed=7)
        guided = self.run_loss(200.0, seed=7)
        assert guided < unguided
        assert (unguided - guided) / unguided >= 0.20

    def test_recurrence_variants_terminate_finite(self):
        for rec in (0, 2):
            loss = self.run_loss(200.0, seed=3, steps=50, recurrence=rec)
            assert np.isfinite(loss)

    def test_determinism_bit_identical(self):
        oracle, stats, shape, T = self.setup()
        cfg = GuidanceConfig(w=1.75, u=200.0, steps=40, recurrence=1, schedule=SCHED)
        a = sample_looping(oracle, "img", cfg, shape, stats, T, seed=11)
        b = sample_looping(oracle, "img", cfg, shape, stats, T, seed=11)
        np.testing.assert_array_equal(a.data, b.data)

    def test_bad_shape_rejected(self):
        oracle, stats, _, T = self.setup()
        cfg = GuidanceConfig(steps=10, schedule=SCHED)
        with pytest.raises(DataError):
            sample_looping(oracle, "img", cfg, (2, 2, 4, 2, 2), stats, T)


def test_predict_clean_is_mean_for_zero_variance_oracle():
    rng = np.random.default_rng(12)
    mu = rng.normal(size=(1, 2, 4, 2, 2)) * 0.5
    oracle = GaussianOracleDenoiser(mean=mu, schedule=SCHED, data_std=0.0)
    cfg = GuidanceConfig(w=0.0, u=0.0, steps=10, schedule=SCHED)
    z = rng.normal(size=(1, 2, 4, 2, 2))
    np.testing.assert_allclose(predict_clean(z, 800, oracle, "c", cfg), mu, atol=1e-9)
