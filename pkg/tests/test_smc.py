"""Particle filter: weights, resampling, likelihood estimate, trajectories."""

import numpy as np
import pytest

from phmc.diagnostics import kalman_log_likelihood
from phmc.errors import DegenerateFilterError
from phmc.model import make_lgssm_model, make_poisson_model, simulate_dataset
from phmc.smc import (
    FilterConfig,
    ess,
    log_marginal_increments,
    resample,
    run_filter,
)


class TestEss:
    def test_uniform_weights(self):
        assert ess(np.full(10, 0.1)) == pytest.approx(10.0)

    def test_one_hot(self):
        w = np.zeros(7)
        w[3] = 1.0
        assert ess(w) == pytest.approx(1.0)

    def test_direct_formula(self):
        assert ess(np.array([0.5, 0.25, 0.25])) == pytest.approx(8.0 / 3.0)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            ess(np.array([0.5, 0.6]))

    def test_range_property(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(2, 30)
            w = rng.dirichlet(np.ones(n))
            assert 1.0 - 1e-9 <= ess(w) <= n + 1e-9


class TestResample:
    def test_point_mass_all_schemes(self):
        w = np.zeros(5)
        w[3] = 1.0
        rng = np.random.default_rng(1)
        for scheme in ("systematic", "stratified", "multinomial"):
            anc = resample(w, 5, scheme, rng)
            assert np.all(anc == 3)

    def test_systematic_identity_with_injected_zero(self):
        w = np.full(3, 1.0 / 3.0)
        anc = resample(w, 3, "systematic", rng=None, u=0.0)
        assert np.array_equal(anc, [0, 1, 2])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            resample(np.array([np.nan, 1.0]), 2, "systematic", np.random.default_rng(0))

    @pytest.mark.parametrize("scheme", ["systematic", "stratified", "multinomial"])
    def test_unbiased_offspring_counts(self, scheme):
        # mean offspring of particle i over many replications must be N * W_i
        w = np.array([0.7, 0.2, 0.1])
        n_draws, reps = 10, 100_000
        rng = np.random.default_rng(99)
        counts = np.zeros(3)
        for _ in range(reps):
            anc = resample(w, n_draws, scheme, rng)
            counts += np.bincount(anc, minlength=3)
        mean_offspring = counts / reps
        se = 3.0 * np.sqrt(n_draws * w * (1.0 - w) / reps)
        assert np.all(np.abs(mean_offspring - n_draws * w) <= se)


def tiny_poisson_setup(T=30, seed=2, n=64):
    model = make_poisson_model()
    theta = np.array([0.8, 0.5, 0.2])
    _, y = simulate_dataset(model, theta, T, seed=seed)
    cfg = FilterConfig(N=n)
    return model, theta, y, cfg


class TestRunFilter:
    def test_single_particle_single_step(self):
        model, theta, y, _ = tiny_poisson_setup(T=1)
        cfg = FilterConfig(N=1)
        rng = np.random.default_rng(8)
        res = run_filter(model, theta, y, cfg, rng)
        # reproduce the lone initial draw with the same stream
        h1 = model.sample_init(theta, np.random.default_rng(8), size=1)
        assert res.log_z == pytest.approx(float(model.log_obs(theta, y[0], h1[0])))

    def test_weights_normalized_every_step(self):
        model, theta, y, cfg = tiny_poisson_setup(T=60)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(3))
        sums = res.system.W.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-12

    def test_ess_invariant(self):
        model, theta, y, cfg = tiny_poisson_setup(T=60)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(3))
        assert np.all(res.system.ess >= 1.0 - 1e-9)
        assert np.all(res.system.ess <= cfg.N + 1e-9)

    def test_identity_ancestors_without_resampling(self):
        model, theta, y, cfg = tiny_poisson_setup(T=60)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(4))
        sys_ = res.system
        idx = np.arange(cfg.N)
        for t in range(sys_.T):
            if not sys_.resampled[t]:
                assert np.array_equal(sys_.ancestors[t], idx)

    def test_threshold_one_resamples_every_step(self):
        model, theta, y, _ = tiny_poisson_setup(T=25)
        cfg = FilterConfig(N=64, ess_threshold_fraction=1.0)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(5))
        assert np.all(res.system.resampled[1:])

    def test_trajectory_traces_stored_particles(self):
        model, theta, y, cfg = tiny_poisson_setup(T=40)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(6))
        sys_ = res.system
        idx = res.traj_indices
        for t in range(sys_.T):
            assert res.trajectory[t] == sys_.particles[t, idx[t]]
        for t in range(1, sys_.T):
            assert idx[t - 1] == sys_.ancestors[t, idx[t]]

    def test_deterministic_given_seed(self):
        model, theta, y, cfg = tiny_poisson_setup(T=40)
        r1 = run_filter(model, theta, y, cfg, np.random.default_rng(7))
        r2 = run_filter(model, theta, y, cfg, np.random.default_rng(7))
        assert r1.log_z == r2.log_z
        assert np.array_equal(r1.trajectory, r2.trajectory)
        assert np.array_equal(r1.system.W, r2.system.W)
        assert np.array_equal(r1.system.ancestors, r2.system.ancestors)

    def test_rejects_unsupported_theta(self):
        model, _, y, cfg = tiny_poisson_setup()
        with pytest.raises(ValueError):
            run_filter(model, np.array([1.5, 0.0, 0.2]), y, cfg, np.random.default_rng(0))

    def test_degenerate_weights_raise_with_time_index(self):
        # the Gaussian observation density underflows to zero at an absurd y
        model = make_lgssm_model(1)
        theta = np.array([0.0, 0.25, 0.2, 0.8])
        y = np.zeros(5)
        y[2] = 1e200
        with pytest.raises(DegenerateFilterError) as exc:
            run_filter(model, theta, y, FilterConfig(N=32), np.random.default_rng(1))
        assert exc.value.t == 3

    @pytest.mark.parametrize("T,N", [(5, 50), (5, 500), (20, 50), (20, 500)])
    def test_likelihood_unbiased_against_kalman(self, T, N):
        model = make_lgssm_model(1)
        theta = np.array([0.5, 0.25, 0.2, 0.8])
        _, y = simulate_dataset(model, theta, T, seed=T * 1000 + N)
        exact = kalman_log_likelihood(theta, y, 1)
        cfg = FilterConfig(N=N)
        n_runs = 500
        ratios = np.empty(n_runs)
        for r in range(n_runs):
            res = run_filter(model, theta, y, cfg, np.random.default_rng((r, T, N)))
            ratios[r] = np.exp(res.log_z - exact)
        se = ratios.std(ddof=1) / np.sqrt(n_runs)
        assert abs(ratios.mean() - 1.0) <= 3.0 * se


class TestLogMarginalIncrements:
    def test_sum_equals_log_z_exactly(self):
        model, theta, y, cfg = tiny_poisson_setup(T=50)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(9))
        inc = log_marginal_increments(res.system)
        assert np.sum(inc) == res.log_z

    def test_equal_weights_give_zero_increment(self):
        model, theta, y, cfg = tiny_poisson_setup(T=3)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(10))
        sys_ = res.system
        sys_.resampled[1:] = False
        sys_.log_w[1] = sys_.log_w[0]
        inc = log_marginal_increments(sys_)
        assert inc[1] == 0.0

    def test_single_step_two_particles(self):
        model, theta, y, _ = tiny_poisson_setup(T=1)
        cfg = FilterConfig(N=2)
        res = run_filter(model, theta, y, cfg, np.random.default_rng(11))
        w = np.exp(res.system.log_w[0])
        inc = log_marginal_increments(res.system)
        assert inc[0] == pytest.approx(np.log(w.sum() / 2.0))
        assert res.log_z == pytest.approx(np.log(w.sum() / 2.0))


class TestFilterConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FilterConfig(N=0)
        with pytest.raises(ValueError):
            FilterConfig(ess_threshold_fraction=0.0)
        with pytest.raises(ValueError):
            FilterConfig(ess_threshold_fraction=1.5)
        with pytest.raises(ValueError):
            FilterConfig(resampling="other")
        with pytest.raises(ValueError):
            FilterConfig(proposal="guided")
