import numpy as np
import pytest

from mtqmle.samplers import (
    NoiseSpec,
    doa_sigma2_for_snr_db,
    load_dataset,
    regression_sigma2_for_snr_db,
    regression_snr,
    sample_bpsk,
    sample_complex_gaussian,
    sample_noise,
    sample_texture,
    save_dataset,
    stream_rng,
    synthesize_doa,
    synthesize_regression,
    texture_expectation,
)


class TestComplexGaussian:
    def test_covariance_close_to_isotropic(self):
        rng = stream_rng(0, 0)
        sigma2 = 2.5
        x = sample_complex_gaussian(3, sigma2, 10 ** 5, rng)
        cov = (x.T @ x.conj()) / x.shape[0]
        assert np.linalg.norm(cov - sigma2 * np.eye(3)) < 0.05 * np.linalg.norm(
            sigma2 * np.eye(3))

    def test_circularity(self):
        rng = stream_rng(1, 0)
        x = sample_complex_gaussian(3, 1.0, 10 ** 5, rng)
        pseudo = (x.T @ x) / x.shape[0]
        assert np.linalg.norm(pseudo) < 0.02

    def test_stream_determinism(self):
        a = sample_complex_gaussian(2, 1.0, 100, stream_rng(42, 7))
        b = sample_complex_gaussian(2, 1.0, 100, stream_rng(42, 7))
        assert a.tobytes() == b.tobytes()
        c = sample_complex_gaussian(2, 1.0, 100, stream_rng(42, 8))
        assert a.tobytes() != c.tobytes()


class TestTexture:
    def test_k_texture_unit_mean(self):
        nu = sample_texture("k", 0.75, 10 ** 6, stream_rng(2, 0))
        assert np.mean(nu ** 2) == pytest.approx(1.0, abs=0.01)

    def test_gaussian_texture_is_one(self):
        np.testing.assert_array_equal(
            sample_texture("gaussian", None, 50, stream_rng(3, 0)), np.ones(50))

    def test_t_texture_heavy_tails(self):
        # with lam = 0.2 an excursion beyond 50 sigma appears in most runs
        hits = 0
        for seed in range(4):
            spec = NoiseSpec("t", 1.0, 2, lam=0.2)
            w = sample_noise(spec, 10 ** 4, stream_rng(100 + seed, 0))
            hits += np.abs(w).max() > 50.0
        assert hits >= 2

    def test_unsupported_kind(self):
        with pytest.raises(ValueError, match="unsupported"):
            sample_texture("cauchy", 1.0, 5, stream_rng(0, 0))


class TestBPSK:
    def test_constant_modulus(self):
        s = sample_bpsk(4.0, 1000, stream_rng(4, 0))
        np.testing.assert_allclose(np.abs(s), 2.0)

    def test_zero_mean_band(self):
        n = 10 ** 5
        s = sample_bpsk(1.0, n, stream_rng(5, 0))
        assert abs(s.mean()) < 3 * np.sqrt(1.0 / n)

    def test_sign_symmetry(self):
        s = sample_bpsk(1.0, 10 ** 4, stream_rng(6, 0))
        flipped = -s
        assert sorted(np.abs(s)) == sorted(np.abs(flipped))
        assert abs(np.mean(s) + np.mean(flipped)) < 1e-12


class TestSynthesize:
    def test_noiseless_limit_regression(self, reg_gaussian, alpha0):
        quiet = NoiseSpec("gaussian", 1e-20, 10)
        x = synthesize_regression(reg_gaussian.a_matrix, alpha0, quiet, 5,
                                  stream_rng(7, 0))
        target = reg_gaussian.a_matrix @ alpha0
        assert np.abs(x - target[None, :]).max() < 1e-8

    def test_noiseless_limit_doa(self):
        quiet = NoiseSpec("gaussian", 1e-20, 4)
        x = synthesize_doa(4, 0.3, 1.0, quiet, 3, stream_rng(8, 0))
        steer = np.exp(-1j * np.pi * np.arange(4) * np.sin(0.3))
        ratios = x / steer[None, :]
        np.testing.assert_allclose(np.abs(ratios), 1.0, atol=1e-8)

    def test_snr_bookkeeping(self, reg_gaussian):
        a = reg_gaussian.a_matrix
        sigma2 = regression_sigma2_for_snr_db(a, 0.0)
        assert regression_snr(a, sigma2) == pytest.approx(1.0)
        assert doa_sigma2_for_snr_db(1.0, -15.0) == pytest.approx(10 ** 1.5)

    def test_reproducible_hash(self, reg_gaussian, alpha0):
        runs = [synthesize_regression(reg_gaussian.a_matrix, alpha0,
                                      reg_gaussian.noise, 64,
                                      stream_rng(9, 3)).tobytes()
                for _ in range(2)]
        assert runs[0] == runs[1]

    def test_dimension_mismatch(self, reg_gaussian, alpha0):
        bad = NoiseSpec("gaussian", 1.0, 7)
        with pytest.raises(ValueError):
            synthesize_regression(reg_gaussian.a_matrix, alpha0, bad, 3,
                                  stream_rng(0, 0))


class TestSphericalStructure:
    def test_direction_uniformity(self):
        # |u^H W|^2 / ||W||^2 ~ Beta(1, p-1) for isotropic W
        p, n = 4, 10 ** 5
        spec = NoiseSpec("k", 1.0, p, lam=0.75)
        w = sample_noise(spec, n, stream_rng(10, 0))
        u = np.full(p, 1 / np.sqrt(p), dtype=complex)
        t = np.abs(w @ u.conj()) ** 2 / np.sum(np.abs(w) ** 2, axis=1)
        assert t.mean() == pytest.approx(1.0 / p, abs=0.005)
        var_expected = (p - 1) / (p ** 2 * (p + 1))
        assert t.var() == pytest.approx(var_expected, rel=0.1)

    def test_texture_gaussian_independence(self):
        n = 10 ** 5
        rng = stream_rng(11, 0)
        z = sample_complex_gaussian(3, 1.0, n, rng)
        nu = sample_texture("k", 0.75, n, rng)
        corr = np.corrcoef(nu ** 2, np.sum(np.abs(z) ** 2, axis=1))[0, 1]
        assert abs(corr) < 0.01


class TestTextureExpectation:
    def test_gaussian_exact(self):
        spec = NoiseSpec("gaussian", 1.0, 4)
        assert texture_expectation(spec, lambda nu2: nu2 ** 3 + 1.0) == 2.0

    def test_k_texture_against_quadrature(self):
        from scipy import integrate, stats
        lam = 0.75
        spec = NoiseSpec("k", 1.0, 4, lam=lam)
        fn = lambda nu2: 1.0 / (1.0 + nu2)
        mc = texture_expectation(spec, fn)
        dist = stats.gamma(lam, scale=1 / lam)
        quad, _ = integrate.quad(lambda v: fn(v) * dist.pdf(v), 0, np.inf)
        assert mc == pytest.approx(quad, rel=5e-3)

    def test_deterministic_across_calls(self):
        spec = NoiseSpec("t", 1.0, 4, lam=0.2)
        f = lambda nu2: np.exp(-nu2)
        assert texture_expectation(spec, f) == texture_expectation(spec, f)


def test_dataset_roundtrip(tmp_path, rng):
    x = (rng.standard_normal((17, 3)) + 1j * rng.standard_normal((17, 3)))
    path = tmp_path / "data.csv"
    save_dataset(x, path)
    header = path.read_text().splitlines()[0]
    assert header == "re_0,im_0,re_1,im_1,re_2,im_2"
    np.testing.assert_array_equal(load_dataset(path), x)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("t", 1.0, 4)          # missing lam
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", -1.0, 4)  # bad dispersion
    with pytest.raises(ValueError):
        NoiseSpec("weird", 1.0, 4)
