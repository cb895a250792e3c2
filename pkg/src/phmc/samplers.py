"""Samplers: leapfrog integration, HMC, PMMH and particle HMC.

Particle HMC replaces the exact potential U(theta) = -log p(y, theta) and
its gradient with particle-filter estimates.  Each iteration draws a fresh
momentum, runs one filter at the current parameters (a fresh likelihood
estimate and log-posterior gradient estimate), performs L leapfrog steps --
each inner step running one more filter at the proposed parameters -- and
accepts the endpoint with the usual Hamiltonian Metropolis correction
evaluated on the estimated quantities.  The latent trajectory proposed with
the endpoint is the one sampled by the final inner filter run, so the
accepted trajectory and the likelihood estimate entering the acceptance
ratio come from the same run.

All acceptance computations stay in the log domain; no natural-scale
likelihood is ever formed.  Chains are deterministic given (seed, config,
data): every filter run inside an iteration draws from its own substream
keyed by (iteration, leapfrog step).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateFilterError, DivergenceError
from .model import ParamVector
from .smc import FilterConfig, run_filter

__all__ = [
    "SamplerConfig",
    "ChainOutput",
    "HamiltonianValue",
    "leapfrog",
    "hmc",
    "pmmh",
    "phmc",
]

logger = logging.getLogger(__name__)

# a leapfrog trajectory whose potential moves this far is declared divergent
_MAX_POTENTIAL_JUMP = 1e6


@dataclass
class SamplerConfig:
    K: int = 1000
    L: int = 5
    epsilon: float = 0.05
    N: int = 500
    burn_in: int = 0
    thin: int = 1
    rw_scale: float = 0.1
    seed: int = 0
    ess_threshold_fraction: float = 0.5
    resampling: str = "systematic"
    reuse_current_loglik: bool = False

    def __post_init__(self):
        if not self.K > self.burn_in >= 0:
            raise ValueError("need K > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.rw_scale < 0:
            raise ValueError("rw_scale must be >= 0")

    def filter_config(self):
        return FilterConfig(
            N=self.N,
            ess_threshold_fraction=self.ess_threshold_fraction,
            resampling=self.resampling,
        )


@dataclass
class ChainOutput:
    """Kept draws plus per-iteration acceptance bookkeeping."""

    draws: List[Tuple[ParamVector, Optional[np.ndarray], float]]
    accepted: np.ndarray
    acceptance_rate: float
    n_divergent: int = 0
    n_degenerate: int = 0
    n_out_of_support: int = 0

    @property
    def thetas(self):
        return np.array([d[0].values for d in self.draws])


@dataclass(frozen=True)
class HamiltonianValue:
    potential: float
    kinetic: float

    @property
    def total(self):
        return self.potential + self.kinetic


def _hamiltonian(potential, r):
    return HamiltonianValue(potential=float(potential), kinetic=0.5 * float(np.dot(r, r)))


def _substream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _param_names(theta_init, d):
    if isinstance(theta_init, ParamVector):
        return theta_init.names
    return tuple(f"theta_{i + 1}" for i in range(d))


def _accepts(rng, log_acc):
    if log_acc >= 0.0:
        return True
    u = rng.random()
    with np.errstate(divide="ignore"):
        return np.log(u) < log_acc


def leapfrog(grad, theta0, r0, L, epsilon):
    """Stoermer-Verlet integration of Hamiltonian dynamics.

    ``grad`` must return the gradient of the log-posterior (the negative
    potential gradient), so momentum half-steps are
    r <- r + (epsilon/2) * grad(theta).

    Returns
    -------
    (theta_L, r_L, trace) where trace is the list of full-step states
    [(theta_0, r_0), ..., (theta_L, r_L)].

    Raises
    ------
    DivergenceError
        if a gradient evaluation returns a non-finite value (carries the
        1-based step index).
    """
    if L < 1 or epsilon <= 0:
        raise ValueError("need L >= 1 and epsilon > 0")
    theta = np.asarray(getattr(theta0, "values", theta0), dtype=float).copy()
    r = np.asarray(r0, dtype=float).copy()
    trace = [(theta.copy(), r.copy())]
    g = np.asarray(grad(theta), dtype=float)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(1)
    for i in range(1, L + 1):
        r_half = r + 0.5 * epsilon * g
        theta = theta + epsilon * r_half
        g = np.asarray(grad(theta), dtype=float)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(i)
        r = r_half + 0.5 * epsilon * g
        trace.append((theta.copy(), r.copy()))
    return theta, r, trace


def _kept(k, cfg):
    return k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0


def hmc(log_post, grad_log_post, cfg, theta_init):
    """Reference HMC with identity mass matrix on an analytic target."""
    theta = np.asarray(getattr(theta_init, "values", theta_init), dtype=float).copy()
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta_init must be finite")
    d = theta.shape[0]
    names = _param_names(theta_init, d)
    rng = _substream(cfg.seed, 0)

    lp_cur = float(log_post(theta))
    accepted = np.zeros(cfg.K, dtype=bool)
    draws = []
    n_div = 0
    for k in range(1, cfg.K + 1):
        r0 = rng.standard_normal(d)
        try:
            theta_prop, r_prop, _ = leapfrog(grad_log_post, theta, r0, cfg.L, cfg.epsilon)
            lp_prop = float(log_post(theta_prop))
            # Ha(theta0, r0) - Ha(thetaL, -rL); the kinetic term is even in r
            log_acc = (lp_prop - _hamiltonian(0.0, r_prop).kinetic) - (
                lp_cur - _hamiltonian(0.0, r0).kinetic
            )
            if _accepts(rng, log_acc):
                theta, lp_cur = theta_prop, lp_prop
                accepted[k - 1] = True
        except DivergenceError as err:
            n_div += 1
            logger.debug("hmc iteration %d: %s", k, err)
        if _kept(k, cfg):
            draws.append((ParamVector(theta.copy(), names), None, lp_cur))
    return ChainOutput(
        draws=draws,
        accepted=accepted,
        acceptance_rate=float(accepted.mean()),
        n_divergent=n_div,
    )


def pmmh(model, y, cfg, theta_init, filter_stream=None):
    """Particle marginal Metropolis-Hastings with a Gaussian random walk.

    One filter run per proposal; the stored likelihood estimate of the
    current state is reused, never recomputed.  Out-of-support proposals are
    rejected without running the filter, and degenerate filter runs count as
    rejections.
    """
    theta = np.asarray(getattr(theta_init, "values", theta_init), dtype=float).copy()
    if not model.in_support(theta):
        raise ValueError("theta_init outside the prior support")
    names = _param_names(theta_init, model.d_theta)
    y = model.check_observations(y)
    fcfg = cfg.filter_config()
    rng = _substream(cfg.seed, 0)
    if filter_stream is None:
        filter_stream = lambda k: _substream(cfg.seed, 1, k)

    res = run_filter(model, theta, y, fcfg, filter_stream(0))
    log_z, traj = res.log_z, res.trajectory
    lp_cur = model.log_prior(theta)

    accepted = np.zeros(cfg.K, dtype=bool)
    draws = []
    n_deg = 0
    n_oos = 0
    for k in range(1, cfg.K + 1):
        z = rng.standard_normal(model.d_theta)
        theta_prop = theta + cfg.rw_scale * z
        if not model.in_support(theta_prop):
            n_oos += 1
        else:
            try:
                res = run_filter(model, theta_prop, y, fcfg, filter_stream(k))
            except DegenerateFilterError as err:
                n_deg += 1
                logger.debug("pmmh iteration %d: %s", k, err)
            else:
                lp_prop = model.log_prior(theta_prop)
                log_acc = (res.log_z + lp_prop) - (log_z + lp_cur)
                if _accepts(rng, log_acc):
                    theta, log_z, traj, lp_cur = (
                        theta_prop,
                        res.log_z,
                        res.trajectory,
                        lp_prop,
                    )
                    accepted[k - 1] = True
        if _kept(k, cfg):
            draws.append((ParamVector(theta.copy(), names), traj.copy(), log_z))
    return ChainOutput(
        draws=draws,
        accepted=accepted,
        acceptance_rate=float(accepted.mean()),
        n_degenerate=n_deg,
        n_out_of_support=n_oos,
    )


def phmc(model, y, cfg, theta_init, score_kind="quadratic", filter_stream=None):
    """Particle HMC: leapfrog on particle estimates of the posterior gradient.

    Per iteration: one filter-plus-score run at the current parameters, then
    one per leapfrog step, the last of which also provides the proposed
    latent trajectory and the likelihood estimate entering the acceptance
    ratio (L + 1 runs in total).  With ``cfg.reuse_current_loglik`` the
    current-state estimates are reused from the last accepted proposal
    instead of being refreshed (the pseudo-marginal convention), saving one
    run per iteration.

    A leapfrog step that leaves the prior support rejects the iteration
    immediately without further filter runs; degenerate filters and
    divergent potentials also reject.
    """
    if score_kind not in ("linear", "quadratic"):
        raise ValueError(f"unknown score kind {score_kind!r}")
    theta = np.asarray(getattr(theta_init, "values", theta_init), dtype=float).copy()
    if not model.in_support(theta):
        raise ValueError("theta_init outside the prior support")
    names = _param_names(theta_init, model.d_theta)
    y = model.check_observations(y)
    fcfg = cfg.filter_config()
    rng = _substream(cfg.seed, 0)
    if filter_stream is None:
        filter_stream = lambda k, i: _substream(cfg.seed, 1, k, i)

    d = model.d_theta
    traj = None
    stored_log_z = None  # reuse-mode cache attached to the current state
    stored_grad = None
    report_log_z = np.nan  # estimate reported alongside kept draws
    accepted = np.zeros(cfg.K, dtype=bool)
    draws = []
    n_div = 0
    n_deg = 0
    n_oos = 0

    for k in range(1, cfg.K + 1):
        r0 = rng.standard_normal(d)
        rejected = False
        try:
            if cfg.reuse_current_loglik and stored_log_z is not None:
                log_z0, grad0 = stored_log_z, stored_grad
            else:
                res0 = run_filter(
                    model, theta, y, fcfg, filter_stream(k, 0), want_score=score_kind
                )
                log_z0, grad0 = res0.log_z, res0.score.posterior_grad
                if traj is None:
                    traj = res0.trajectory
                if cfg.reuse_current_loglik:
                    stored_log_z, stored_grad = log_z0, grad0
                report_log_z = log_z0
                if not np.all(np.isfinite(grad0)):
                    raise DivergenceError(0)
            pot0 = -log_z0 - model.log_prior(theta)

            theta_prop = theta.copy()
            r = r0 + 0.5 * cfg.epsilon * grad0
            log_z_prop = None
            traj_prop = None
            for i in range(1, cfg.L + 1):
                theta_prop = theta_prop + cfg.epsilon * r
                if not model.in_support(theta_prop):
                    n_oos += 1
                    rejected = True
                    break
                res = run_filter(
                    model,
                    theta_prop,
                    y,
                    fcfg,
                    filter_stream(k, i),
                    want_score=score_kind,
                )
                grad_i = res.score.posterior_grad
                if not np.all(np.isfinite(grad_i)):
                    raise DivergenceError(i)
                pot_i = -res.log_z - model.log_prior(theta_prop)
                if abs(pot_i - pot0) > _MAX_POTENTIAL_JUMP:
                    raise DivergenceError(i, "potential jump exceeds guard")
                if i == cfg.L:
                    r = r + 0.5 * cfg.epsilon * grad_i
                    log_z_prop = res.log_z
                    traj_prop = res.trajectory
                    grad_prop = grad_i
                else:
                    r = r + cfg.epsilon * grad_i
        except DegenerateFilterError as err:
            n_deg += 1
            rejected = True
            logger.debug("phmc iteration %d: %s", k, err)
        except DivergenceError as err:
            n_div += 1
            rejected = True
            logger.debug("phmc iteration %d: %s", k, err)

        if not rejected:
            pot_l = -log_z_prop - model.log_prior(theta_prop)
            ha0 = _hamiltonian(pot0, r0)
            ha_l = _hamiltonian(pot_l, r)
            log_acc = ha0.total - ha_l.total
            if _accepts(rng, log_acc):
                theta = theta_prop
                traj = traj_prop
                stored_log_z = log_z_prop
                stored_grad = grad_prop
                report_log_z = log_z_prop
                accepted[k - 1] = True

        if _kept(k, cfg):
            kept_traj = traj.copy() if traj is not None else None
            draws.append((ParamVector(theta.copy(), names), kept_traj, report_log_z))
    return ChainOutput(
        draws=draws,
        accepted=accepted,
        acceptance_rate=float(accepted.mean()),
        n_divergent=n_div,
        n_degenerate=n_deg,
        n_out_of_support=n_oos,
    )
