"""Solver sweep mechanics, noise learning, and the EM outer loop."""

import io

import numpy as np
import pytest

from scampi.augment import augment
from scampi.core import (EstimationReport, ScampiOptions, SweepError,
                         bethe_noise_update, init_state, run_em_scampi,
                         run_scampi, scampi_iterate, sweep_omega)
from scampi.estimators import SparseGaussianPrior

from conftest import build_small_instance
from _oracles import dense_of


class TestBetheUpdate:
    def test_exact_root_of_quadratic(self, rng):
        delta = rng.standard_normal(500) * 10.0 ** rng.uniform(-3, 3, 500)
        S = 10.0 ** rng.uniform(-6, 6, 500)
        x = bethe_noise_update(delta, S)
        residual = x * x - delta * delta * x - delta * delta * S
        assert np.all(np.abs(residual) <= 1e-10 * np.maximum(1.0, x * x))

    def test_nonnegative_for_negative_residuals(self):
        x = bethe_noise_update(np.array([-2.0, -1e-3]), np.array([1.0, 1.0]))
        assert np.all(x >= 0.0)

    def test_zero_residual_gives_zero_noise(self):
        assert bethe_noise_update(np.zeros(3), np.ones(3)) == pytest.approx(0.0)

    def test_zero_variance_sum_degenerates_to_square(self):
        delta = np.array([3.0, -3.0])
        np.testing.assert_allclose(bethe_noise_update(delta, np.zeros(2)),
                                   [9.0, 9.0], rtol=1e-15)


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScampiOptions(t_max=0)
        with pytest.raises(ValueError):
            ScampiOptions(alpha_damp=1.0)
        with pytest.raises(ValueError):
            ScampiOptions(beta_damp=-0.1)
        with pytest.raises(ValueError):
            ScampiOptions(prior_kind="gamma")
        with pytest.raises(ValueError):
            ScampiOptions(prior_kind="fixed_bg")
        with pytest.raises(ValueError):
            ScampiOptions(em_start=1)

    def test_em_requires_bernoulli_gaussian(self, small_system):
        _, sys_aug = small_system
        with pytest.raises(ValueError):
            run_em_scampi(sys_aug, ScampiOptions(prior_kind="uniform"))


class TestSweep:
    def test_init_state_documented_values(self, small_system):
        _, sys_aug = small_system
        st = init_state(sys_aug, ScampiOptions())
        assert np.all(st.a == 0.0) and np.all(st.v == 0.1)
        assert np.all(st.Theta == sys_aug.MN / (10.0 * sys_aug.Q))
        assert np.all(st.Phi == 0.0) and np.all(st.Delta_check == 0.1)
        assert st.t == 0 and st.tau_trace == []

    def test_fixed_noise_seeds_initial_variances(self, small_system):
        _, sys_aug = small_system
        opts = ScampiOptions(learn_noise=False, fixed_delta=0.03,
                             fixed_upsilon=0.007)
        st = init_state(sys_aug, opts)
        assert np.all(st.Delta_check[:sys_aug.Q] == 0.03)
        assert np.all(st.Delta_check[sys_aug.Q:] == 0.007)
        st = scampi_iterate(st, sys_aug, opts)
        assert np.all(st.Delta_check[:sys_aug.Q] == 0.03)  # learning is off

    def test_structured_matches_dense_operator(self, small_system):
        """Five sweeps through the fast operator equal plain matmuls."""
        _, sys_aug = small_system
        dense = dense_of(sys_aug)
        opts = ScampiOptions()
        sa, sb = init_state(sys_aug, opts), init_state(dense, opts)
        for _ in range(5):
            sa = scampi_iterate(sa, sys_aug, opts)
            sb = scampi_iterate(sb, dense, opts)
        for name in ("a", "v", "Theta", "Phi", "R", "Sigma", "Delta_check"):
            np.testing.assert_allclose(getattr(sa, name), getattr(sb, name),
                                       rtol=1e-9, atol=1e-12, err_msg=name)

    def test_pooled_noise_is_blockwise_constant(self, small_system):
        _, sys_aug = small_system
        opts = ScampiOptions(pooled_noise=True)
        st = init_state(sys_aug, opts)
        for _ in range(3):
            st = scampi_iterate(st, sys_aug, opts)
        top = st.Delta_check[:sys_aug.Q]
        bottom = st.Delta_check[sys_aug.Q:]
        assert np.ptp(top) == 0.0 and np.ptp(bottom) == 0.0

    def test_sweep_error_names_step(self):
        err = SweepError(7, "demo")
        assert "step 7" in str(err) and "noise candidate" in str(err)


class TestRunScampi:
    def test_flat_prior_recovers_channel(self, small_system):
        chan, sys_aug = small_system
        rep = run_scampi(sys_aug, ScampiOptions(), truth=chan.h)
        assert isinstance(rep, EstimationReport)
        assert rep.h_est.size == sys_aug.MN
        assert rep.d_est.size == sys_aug.E
        assert rep.nmse < 0.05
        assert len(rep.tau_trace) == rep.iterations
        assert rep.tau_trace[-1] < rep.tau_trace[0]
        assert rep.learned_prior is None
        assert rep.learned_noise_summary is not None
        assert rep.learned_noise_summary["delta_mean"] > 0.0

    def test_larger_instance_high_snr(self):
        chan, net, meas, diff = build_small_instance(seed=21, M=16, N=16,
                                                     Q=192, L=2,
                                                     snr_db=40.0, d=8.0)
        rep = run_scampi(augment(net, diff, meas), ScampiOptions(),
                         truth=chan.h)
        assert rep.nmse < 5e-3

    def test_nmse_requires_truth(self, small_system):
        _, sys_aug = small_system
        rep = run_scampi(sys_aug, ScampiOptions(t_max=5))
        assert rep.nmse is None
        assert rep.iterations == 5 and not rep.converged

    def test_trace_csv_contents(self, small_system, tmp_path):
        _, sys_aug = small_system
        path = tmp_path / "trace.csv"
        run_scampi(sys_aug, ScampiOptions(t_max=8), trace=path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,tau,delta_mean,upsilon_mean,lam,a,v"
        assert len(lines) == 9
        first = lines[1].split(",")
        assert first[0] == "1" and float(first[1]) > 0.0

    def test_trace_accepts_file_handle(self, small_system):
        _, sys_aug = small_system
        buf = io.StringIO()
        run_scampi(sys_aug, ScampiOptions(t_max=3), trace=buf)
        assert buf.getvalue().startswith("t,tau,")

    def test_fixed_noise_reported_in_trace(self, small_system, tmp_path):
        _, sys_aug = small_system
        path = tmp_path / "trace.csv"
        opts = ScampiOptions(t_max=6, learn_noise=False, fixed_delta=0.02,
                             fixed_upsilon=0.004)
        rep = run_scampi(sys_aug, opts, trace=path)
        assert rep.learned_noise_summary is None
        rows = [ln.split(",") for ln in
                path.read_text().strip().splitlines()[1:]]
        # block means of constant vectors, up to summation rounding
        assert all(float(r[2]) == pytest.approx(0.02, rel=1e-12)
                   and float(r[3]) == pytest.approx(0.004, rel=1e-12)
                   for r in rows)


class TestRunEmScampi:
    def test_learns_prior_and_reports_trace(self):
        chan, net, meas, diff = build_small_instance(seed=21, M=16, N=16,
                                                     Q=192, L=2,
                                                     snr_db=40.0, d=8.0)
        rep = run_em_scampi(augment(net, diff, meas),
                            ScampiOptions(prior_kind="bernoulli_gaussian"),
                            truth=chan.h)
        assert rep.nmse < 0.1
        p = rep.learned_prior
        assert isinstance(p, SparseGaussianPrior)
        assert 1e-6 <= p.lam <= 1.0 - 1e-6 and p.v >= 1e-12
        assert len(rep.prior_trace) >= 1
        assert rep.prior_trace[-1] == (p.lam, p.a, p.v)

    def test_refresh_held_back_until_em_start(self, small_system):
        _, sys_aug = small_system
        opts = ScampiOptions(prior_kind="bernoulli_gaussian", t_max=40,
                             em_start=25)
        rep = run_em_scampi(sys_aug, opts)
        # refreshes happen once per iteration from em_start through t_max
        assert len(rep.prior_trace) == 40 - 25 + 1

    def test_explicit_starting_prior_respected(self, small_system):
        _, sys_aug = small_system
        start = SparseGaussianPrior(lam=0.2, a=0.0, v=5.0)
        opts = ScampiOptions(prior_kind="bernoulli_gaussian", prior=start,
                             t_max=10, em_start=20)
        rep = run_em_scampi(sys_aug, opts)
        # never refreshed: t_max < em_start keeps the starting parameters
        assert rep.learned_prior == start
        assert rep.prior_trace == []

    def test_fixed_bg_prior_without_em(self, small_system):
        chan, sys_aug = small_system
        opts = ScampiOptions(prior_kind="fixed_bg",
                             prior=SparseGaussianPrior(0.3, 0.0, 10.0))
        rep = run_scampi(sys_aug, opts, truth=chan.h)
        assert rep.learned_prior is None
        assert np.isfinite(rep.nmse)


def test_sweep_omega_orders_results(small_system):
    chan, sys_aug = small_system
    omegas = [-1.0, 0.0, 2.0]
    out = sweep_omega(sys_aug, ScampiOptions(t_max=20), omegas, truth=chan.h)
    assert [w for w, _ in out] == omegas
    assert all(isinstance(rep, EstimationReport) for _, rep in out)
    assert all(np.isfinite(rep.nmse) for _, rep in out)
