"""Scalar estimator checks against quadrature oracles and limit algebra."""

import numpy as np
import pytest

from scampi.estimators import (NoSupportWarning, SparseGaussianPrior,
                               bernoulli_gaussian_moments,
                               em_posterior_quantities, em_update,
                               save_sweep_csv, snipe_moments, uniform_moments)

from _oracles import (gaussian_moments_quadrature,
                      snipe_moments_quadrature,
                      spike_slab_moments_quadrature)


def draw_sigma_r(rng, n):
    Sigma = 10.0 ** rng.uniform(-4, 4, n)
    R = np.where(rng.random(n) < 0.5,
                 rng.uniform(-50, 50, n),
                 rng.standard_normal(n) * np.sqrt(Sigma))
    return Sigma, R


def rel_err(closed, oracle):
    return np.abs(closed - oracle) / np.maximum(np.abs(oracle), 1e-300)


class TestSnipe:
    def test_zero_pseudo_measurement(self):
        for omega in (-3.0, 0.0, 2.5):
            m = snipe_moments(1.7, 0.0, omega)
            assert m.fa == 0.0
            assert m.fv == pytest.approx(1.7 / (1.0 + np.exp(omega)), rel=1e-12)

    def test_open_gate_recovers_gaussian(self):
        m = snipe_moments(0.9, -2.3, omega=-200.0)
        assert m.fa == pytest.approx(-2.3, rel=1e-12)
        assert m.fv == pytest.approx(0.9, rel=1e-12)

    def test_matches_quadrature(self, rng):
        Sigma, R = draw_sigma_r(rng, 300)
        omega = rng.uniform(-4, 4, 300)
        fa_o, fv_o = snipe_moments_quadrature(Sigma, R, omega)
        fa = np.array([snipe_moments(s, r, w).fa
                       for s, r, w in zip(Sigma, R, omega)])
        fv = np.array([snipe_moments(s, r, w).fv
                       for s, r, w in zip(Sigma, R, omega)])
        assert rel_err(fa, fa_o).max() < 1e-6
        assert rel_err(fv, fv_o).max() < 1e-6

    def test_shrinkage_monotone(self):
        Sigma, omega = 0.8, 1.2
        R = np.linspace(0.01, 30.0, 500)
        ratio = snipe_moments(np.full_like(R, Sigma), R, omega).fa / R
        assert np.all(ratio >= 0.0) and np.all(ratio <= 1.0)
        assert np.all(np.diff(ratio) >= -1e-15)

    def test_vector_and_scalar_forms_agree(self, rng):
        Sigma, R = draw_sigma_r(rng, 20)
        vec = snipe_moments(Sigma, R, 0.5)
        for i in range(20):
            m = snipe_moments(Sigma[i], R[i], 0.5)
            assert m.fa == vec.fa[i] and m.fv == vec.fv[i]

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            snipe_moments(0.0, 1.0, 0.0)


class TestUniform:
    def test_identity(self):
        m = uniform_moments(0.1, 3.7)
        assert (m.fa, m.fv) == (3.7, 0.1)

    def test_matches_quadrature(self, rng):
        Sigma, R = draw_sigma_r(rng, 100)
        fa_o, fv_o = gaussian_moments_quadrature(Sigma, R)
        m = uniform_moments(Sigma, R)
        assert rel_err(m.fa, fa_o).max() < 1e-6
        assert rel_err(m.fv, fv_o).max() < 1e-6

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            uniform_moments(-1.0, 0.0)


class TestBernoulliGaussian:
    def test_pure_gaussian_limit(self):
        Sigma, R = 0.5, 0.8
        prior = SparseGaussianPrior(lam=1.0, a=1.0, v=2.0)
        m = bernoulli_gaussian_moments(Sigma, R, prior)
        prec = 1.0 / prior.v + 1.0 / Sigma
        assert m.fa == pytest.approx((prior.a / prior.v + R / Sigma) / prec, rel=1e-12)
        assert m.fv == pytest.approx(1.0 / prec, rel=1e-12)

    def test_all_mass_at_zero(self):
        m = bernoulli_gaussian_moments(1.0, 2.0, SparseGaussianPrior(0.0, 0.0, 1.0))
        assert (m.fa, m.fv) == (0.0, 0.0)

    def test_symmetric_posterior_has_zero_mean(self):
        m = bernoulli_gaussian_moments(1.0, 0.0, SparseGaussianPrior(0.5, 0.0, 1.0))
        assert m.fa == 0.0

    def test_matches_quadrature(self, rng):
        n = 300
        Sigma, R = draw_sigma_r(rng, n)
        lam = rng.uniform(0.02, 0.98, n)
        a = rng.uniform(-3, 3, n)
        v = 10.0 ** rng.uniform(-2, 2, n)
        fa_o, fv_o = spike_slab_moments_quadrature(Sigma, R, lam, a, v)
        fa = np.empty(n)
        fv = np.empty(n)
        for i in range(n):
            m = bernoulli_gaussian_moments(Sigma[i], R[i],
                                           SparseGaussianPrior(lam[i], a[i], v[i]))
            fa[i], fv[i] = m.fa, m.fv
        assert rel_err(fa, fa_o).max() < 1e-6
        assert rel_err(fv, fv_o).max() < 1e-6

    def test_wide_slab_approaches_flat_prior(self):
        m = bernoulli_gaussian_moments(0.3, 1.4,
                                       SparseGaussianPrior(1.0, 0.0, 1e12))
        assert m.fa == pytest.approx(1.4, rel=1e-9)
        assert m.fv == pytest.approx(0.3, rel=1e-9)

    def test_variance_nonnegative_sweep(self, rng):
        n = 200_000
        Sigma, R = draw_sigma_r(rng, n)
        lam = rng.uniform(0.0, 1.0, n)
        a = rng.uniform(-5, 5, n)
        v = 10.0 ** rng.uniform(-4, 4, n)
        for chunk in range(0, n, 50_000):
            sl = slice(chunk, chunk + 50_000)
            i = chunk // 50_000
            prior = SparseGaussianPrior(float(lam[chunk]), float(a[chunk]),
                                        float(v[chunk]))
            m = bernoulli_gaussian_moments(Sigma[sl], R[sl], prior)
            assert np.all(m.fv >= 0.0), f"negative variance in chunk {i}"
            assert np.all(np.isfinite(m.fa)) and np.all(np.isfinite(m.fv))


class TestEmQuantities:
    def test_support_probability_limits(self):
        assert em_posterior_quantities(1.0, 0.5, SparseGaussianPrior(1.0, 0.0, 1.0))[0] == 1.0
        assert em_posterior_quantities(1.0, 0.5, SparseGaussianPrior(0.0, 0.0, 1.0))[0] == 0.0

    def test_pi_gamma_product_is_posterior_mean(self, rng):
        Sigma, R = draw_sigma_r(rng, 200)
        prior = SparseGaussianPrior(0.3, 0.5, 2.0)
        pi, gamma, nu = em_posterior_quantities(Sigma, R, prior)
        m = bernoulli_gaussian_moments(Sigma, R, prior)
        assert np.allclose(pi * gamma, m.fa, rtol=1e-12, atol=0.0)
        assert np.all((pi >= 0.0) & (pi <= 1.0))
        assert np.all(nu > 0.0)

    def test_slab_statistics_formulas(self):
        Sigma, R = 0.5, 1.3
        prior = SparseGaussianPrior(0.4, -0.2, 1.7)
        _, gamma, nu = em_posterior_quantities(Sigma, R, prior)
        prec = 1.0 / prior.v + 1.0 / Sigma
        assert gamma == pytest.approx((prior.a / prior.v + R / Sigma) / prec, rel=1e-12)
        assert nu == pytest.approx(1.0 / prec, rel=1e-12)


class TestEmUpdate:
    def test_closed_form_on_small_vectors(self):
        pis = np.array([1.0, 0.5, 0.0, 0.25])
        gammas = np.array([2.0, -1.0, 9.9, 0.5])
        nus = np.array([0.1, 0.2, 0.3, 0.4])
        prior = SparseGaussianPrior(0.5, 0.0, 1.0)
        out = em_update(pis, gammas, nus, prior)
        s = pis.sum()
        a_exp = float((pis * gammas).sum() / s)
        v_exp = float((pis * (nus + (gammas - a_exp) ** 2)).sum() / s)
        assert out.lam == pytest.approx(s / 4.0, rel=1e-15)
        assert out.a == pytest.approx(a_exp, rel=1e-15)
        assert out.v == pytest.approx(v_exp, rel=1e-15)

    def test_full_support_clamps_rate(self):
        out = em_update(np.ones(8), np.full(8, 3.0), np.zeros(8),
                        SparseGaussianPrior(0.5, 0.0, 1.0))
        assert out.lam == pytest.approx(1.0, abs=1e-5)
        assert out.a == pytest.approx(3.0)
        assert out.v >= 1e-12  # floored, never exactly zero

    def test_zero_support_warns_and_keeps_prior(self):
        prior = SparseGaussianPrior(0.2, 1.0, 2.0)
        with pytest.warns(NoSupportWarning):
            out = em_update(np.zeros(5), np.ones(5), np.ones(5), prior)
        assert out is prior

    def test_recovers_synthetic_truth(self, rng):
        n = 200_000
        lam_t, a_t, v_t = 0.3, 1.0, 4.0
        on = rng.random(n) < lam_t
        x = np.where(on, a_t + np.sqrt(v_t) * rng.standard_normal(n), 0.0)
        Sigma = 1e-4  # nearly noiseless pseudo-measurements
        R = x + np.sqrt(Sigma) * rng.standard_normal(n)
        prior = SparseGaussianPrior(0.5, 0.0, 1.0)
        for _ in range(25):
            pi, gamma, nu = em_posterior_quantities(np.full(n, Sigma), R, prior)
            prior = em_update(pi, gamma, nu, prior)
        assert prior.lam == pytest.approx(lam_t, rel=0.05)
        assert prior.a == pytest.approx(a_t, rel=0.05)
        assert prior.v == pytest.approx(v_t, rel=0.05)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            em_update(np.ones(3), np.ones(4), np.ones(3),
                      SparseGaussianPrior(0.5, 0.0, 1.0))


def test_prior_validation():
    with pytest.raises(ValueError):
        SparseGaussianPrior(lam=-0.1, a=0.0, v=1.0)
    with pytest.raises(ValueError):
        SparseGaussianPrior(lam=1.2, a=0.0, v=1.0)
    with pytest.raises(ValueError):
        SparseGaussianPrior(lam=0.5, a=0.0, v=0.0)


def test_sweep_csv_roundtrip(tmp_path, rng):
    Sigma, R = draw_sigma_r(rng, 32)
    m = uniform_moments(Sigma, R)
    path = tmp_path / "sweep.csv"
    save_sweep_csv(path, Sigma, R, m)
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert back.shape == (32, 4)
    np.testing.assert_allclose(back[:, 2], m.fa)
    np.testing.assert_allclose(back[:, 3], m.fv)
