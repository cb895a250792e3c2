"""Leapfrog integration, HMC, PMMH and particle HMC."""

import numpy as np
import pytest

from phmc.errors import DivergenceError
from phmc.model import make_poisson_model, simulate_dataset
from phmc.samplers import SamplerConfig, hmc, leapfrog, phmc, pmmh, _hamiltonian


def quad_grad(theta):
    # standard normal log-density gradient
    return -theta


class TestLeapfrog:
    def test_hand_evaluated_single_step(self):
        theta, r, trace = leapfrog(quad_grad, np.array([1.0]), np.array([0.0]), 1, 0.1)
        assert theta[0] == pytest.approx(0.995, abs=1e-15)
        assert r[0] == pytest.approx(-0.09975, abs=1e-15)
        assert len(trace) == 2

    def test_time_reversal(self):
        grad = lambda th: -th - 0.3 * th**3
        rng = np.random.default_rng(0)
        theta0 = rng.normal(size=3)
        r0 = rng.normal(size=3)
        thetaL, rL, _ = leapfrog(grad, theta0, r0, 25, 0.08)
        theta_back, r_back, _ = leapfrog(grad, thetaL, -rL, 25, 0.08)
        assert np.max(np.abs(theta_back - theta0)) < 1e-10
        assert np.max(np.abs(-r_back - r0)) < 1e-10

    def test_free_particle(self):
        zero = lambda th: np.zeros_like(th)
        theta0, r0 = np.array([0.5, -1.0]), np.array([2.0, 0.25])
        thetaL, rL, _ = leapfrog(zero, theta0, r0, 7, 0.1)
        assert np.allclose(thetaL, theta0 + 7 * 0.1 * r0, rtol=1e-14)
        assert np.array_equal(rL, r0)

    def test_volume_preservation_2d_quadratic(self):
        # |det Jacobian| of one step on phase space must be 1 for U quadratic
        grad = lambda th: -np.array([th[0], 2.0 * th[1]])
        eps = 0.3

        def step(state):
            th, r, _ = leapfrog(grad, state[:2], state[2:], 1, eps)
            return np.concatenate([th, r])

        x0 = np.array([0.4, -0.2, 0.9, 0.1])
        delta = 1e-6
        jac = np.empty((4, 4))
        for i in range(4):
            up, dn = x0.copy(), x0.copy()
            up[i] += delta
            dn[i] -= delta
            jac[:, i] = (step(up) - step(dn)) / (2 * delta)
        assert abs(abs(np.linalg.det(jac)) - 1.0) < 1e-6

    def test_divergent_gradient_carries_step_index(self):
        def grad(th):
            return np.full_like(th, np.inf) if abs(th[0]) > 1.5 else -th

        with pytest.raises(DivergenceError) as exc:
            leapfrog(grad, np.array([1.4]), np.array([4.0]), 5, 0.5)
        assert exc.value.step >= 1

    def test_kinetic_energy_at_rest_is_zero(self):
        assert _hamiltonian(1.23, np.zeros(4)).kinetic == 0.0
        assert _hamiltonian(1.23, np.zeros(4)).total == 1.23


class TestSamplerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(K=10, burn_in=10)
        with pytest.raises(ValueError):
            SamplerConfig(thin=0)
        with pytest.raises(ValueError):
            SamplerConfig(L=0)
        with pytest.raises(ValueError):
            SamplerConfig(epsilon=0.0)

    def test_kept_count_windowing(self):
        cfg = SamplerConfig(K=10, burn_in=9, thin=1, epsilon=0.1, seed=0)
        out = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.zeros(1))
        assert len(out.draws) == 1
        cfg = SamplerConfig(K=100, burn_in=20, thin=7, epsilon=0.1, seed=0)
        out = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.zeros(1))
        assert len(out.draws) == (100 - 20) // 7


class TestHmc:
    def test_standard_normal_moments(self):
        cfg = SamplerConfig(K=20_000, L=10, epsilon=0.1, burn_in=1000, thin=1, seed=123)
        out = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.array([2.0]))
        draws = out.thetas[:, 0]
        assert abs(draws.mean()) < 0.05
        assert abs(draws.var() - 1.0) < 0.1

    def test_tiny_step_accepts_everything(self):
        cfg = SamplerConfig(K=200, L=3, epsilon=1e-8, seed=5)
        out = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.array([0.7]))
        assert out.acceptance_rate == 1.0

    def test_acceptance_rate_is_mean_of_accepted(self):
        cfg = SamplerConfig(K=500, L=5, epsilon=0.9, seed=6)
        out = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.array([0.0]))
        assert out.acceptance_rate == pytest.approx(out.accepted.mean())

    def test_divergences_counted_as_rejections(self):
        def grad(th):
            return np.full_like(th, np.nan) if abs(th[0]) > 1.0 else -th

        cfg = SamplerConfig(K=300, L=5, epsilon=0.5, seed=7)
        out = hmc(lambda th: -0.5 * th @ th, grad, cfg, np.array([0.9]))
        assert out.n_divergent > 0
        assert len(out.draws) == 300

    def test_deterministic_given_seed(self):
        cfg = SamplerConfig(K=100, L=5, epsilon=0.2, seed=11)
        a = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.array([0.3]))
        b = hmc(lambda th: -0.5 * th @ th, quad_grad, cfg, np.array([0.3]))
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.accepted, b.accepted)


@pytest.fixture(scope="module")
def poisson_data():
    model = make_poisson_model()
    theta_true = np.array([0.8, 0.5, 0.2])
    _, y = simulate_dataset(model, theta_true, 30, seed=17)
    return model, theta_true, y


class TestPmmh:
    def test_zero_scale_with_shared_filter_stream_accepts_always(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=20, N=40, rw_scale=0.0, seed=3)
        out = pmmh(model, y, cfg, theta_true, filter_stream=lambda k: np.random.default_rng(77))
        assert out.acceptance_rate == 1.0

    def test_out_of_support_proposals_skip_filter(self, poisson_data):
        model, theta_true, y = poisson_data
        calls = []
        guarded = lambda theta, y_, h: (calls.append(theta.copy()), model.log_obs(theta, y_, h))[1]
        import dataclasses

        probe = dataclasses.replace(model, log_obs=guarded)
        cfg = SamplerConfig(K=40, N=20, rw_scale=50.0, seed=4)
        out = pmmh(probe, y, cfg, theta_true)
        assert out.n_out_of_support > 0
        for theta in calls:
            assert model.in_support(theta)

    def test_deterministic_given_seed(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=60, N=40, rw_scale=0.15, seed=9)
        a = pmmh(model, y, cfg, theta_true)
        b = pmmh(model, y, cfg, theta_true)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.accepted, b.accepted)

    def test_rejects_unsupported_start(self, poisson_data):
        model, _, y = poisson_data
        cfg = SamplerConfig(K=10, N=20, seed=1)
        with pytest.raises(ValueError):
            pmmh(model, y, cfg, np.array([2.0, 0.0, 0.2]))


class TestPhmc:
    def test_runs_and_respects_support(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=25, L=2, epsilon=0.02, N=50, seed=13)
        out = phmc(model, y, cfg, theta_true)
        assert len(out.draws) == 25
        for pv, traj, log_z in out.draws:
            assert model.in_support(pv.values)
            assert np.all(np.isfinite(pv.values))
            assert traj.shape == y.shape
            assert np.isfinite(log_z)

    def test_particle_mala_smoke(self, poisson_data):
        # L = 1 reduces the proposal to one Langevin-style step
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=40, L=1, epsilon=0.03, N=50, seed=14)
        out = phmc(model, y, cfg, theta_true)
        assert 0.0 < out.acceptance_rate <= 1.0

    def test_deterministic_given_seed(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=25, L=2, epsilon=0.02, N=40, seed=15)
        a = phmc(model, y, cfg, theta_true)
        b = phmc(model, y, cfg, theta_true)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.accepted, b.accepted)

    def test_out_of_support_leapfrog_rejects_without_density_calls(self, poisson_data):
        model, theta_true, y = poisson_data
        calls = []
        guarded = lambda theta, y_, h: (calls.append(theta.copy()), model.log_obs(theta, y_, h))[1]
        import dataclasses

        probe = dataclasses.replace(model, log_obs=guarded)
        # enormous step size guarantees leaving the support
        cfg = SamplerConfig(K=12, L=3, epsilon=12.0, N=30, seed=16)
        out = phmc(probe, y, cfg, theta_true)
        assert out.n_out_of_support > 0
        for theta in calls:
            assert model.in_support(theta)

    def test_reuse_current_loglik_mode_runs(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=25, L=2, epsilon=0.02, N=40, seed=18, reuse_current_loglik=True)
        out = phmc(model, y, cfg, theta_true)
        assert len(out.draws) == 25

    def test_linear_score_kind(self, poisson_data):
        model, theta_true, y = poisson_data
        cfg = SamplerConfig(K=15, L=2, epsilon=0.02, N=40, seed=19)
        out = phmc(model, y, cfg, theta_true, score_kind="linear")
        assert len(out.draws) == 15
        with pytest.raises(ValueError):
            phmc(model, y, cfg, theta_true, score_kind="other")
