"""State-space model definitions.

A model is a bundle of log-densities, samplers and analytic parameter
gradients for

    y_t | h_t      ~  g(y_t | h_t)
    h_t | h_{t-1}  ~  f(h_t | h_{t-1})
    h_1            ~  mu(h_1)

together with a prior on the parameter vector.  Two concrete models are
provided:

* :func:`make_poisson_model` -- Poisson counts driven by a latent AR(1)
  log-intensity, parameters (rho, alpha, sigma_h).
* :func:`make_lgssm_model` -- linear Gaussian state-space model whose
  transition carries the average of d shift parameters,
  parameters (kappa_1..kappa_d, sigma_y, sigma_h, rho).

All density/gradient callables are pure functions of ``(theta, ...)`` and
broadcast over numpy arrays, so they can be evaluated for a whole particle
cloud at once.  Gradients are returned with the parameter axis last, i.e.
shape ``(..., d_theta)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ParamVector",
    "GaussianAR1",
    "ModelDefinition",
    "make_poisson_model",
    "make_lgssm_model",
    "simulate_dataset",
]

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# Gamma(a, b) prior on the precision 1/sigma^2, shared by both models.
_GAMMA_A = 0.01
_GAMMA_B = 0.01


@dataclass(frozen=True)
class ParamVector:
    """Ordered parameter values with component labels."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if values.ndim != 1 or values.shape[0] != len(self.names):
            raise ValueError("values and names must have matching length")
        if not np.all(np.isfinite(values)):
            raise ValueError("parameter values must be finite")

    @property
    def d_theta(self):
        return self.values.shape[0]

    def as_dict(self):
        return {name: float(v) for name, v in zip(self.names, self.values)}

    def replace(self, values):
        return ParamVector(np.asarray(values, dtype=float), self.names)


@dataclass(frozen=True)
class GaussianAR1:
    """Structure tag for models with transition N(rho*h + drift, sigma^2).

    The fast quadratic-score kernels rely on this shared structure: the
    per-pair transition gradient must be affine in z, z^2 - 1 and
    h_prev * z, with z the standardized transition residual, and the
    gradient components are expressed in the compressed space defined by the
    model's ``grad_groups`` (one column per group of components with
    identical observation/transition/initial gradients).
    """

    params: Callable            # theta -> (rho, drift, sigma)
    trans_grad_coeffs: Callable  # theta -> (coef_z, coef_z2m1, coef_hz), each (m,)
    obs_grad: Callable          # (theta, y_t, h) -> (..., m) compressed
    init_grad: Callable         # (theta, h) -> (..., m) compressed


@dataclass
class ModelDefinition:
    """State-space model plus parameter prior.

    Density callables take ``theta`` (1-d ndarray) first and broadcast over
    their remaining array arguments.  ``grad_*`` callables return an array
    whose trailing axis has length ``d_theta``.
    """

    name: str
    d_theta: int
    param_names: tuple
    obs_kind: str  # "count" or "real"
    log_init: Callable
    log_trans: Callable
    log_obs: Callable
    sample_init: Callable
    sample_trans: Callable
    sample_obs: Callable
    grad_log_init: Callable
    grad_log_trans: Callable
    grad_log_obs: Callable
    log_prior: Callable
    grad_log_prior: Callable
    in_support: Callable
    sample_prior: Optional[Callable] = None  # rng -> theta array
    ar1: Optional[GaussianAR1] = None
    # component index groups whose transition/obs/init gradients coincide
    # (used to compress the quadratic-score recursion); singletons by default
    grad_groups: tuple = field(default=())

    def param_vector(self, values):
        return ParamVector(np.asarray(values, dtype=float), self.param_names)

    def check_observations(self, y):
        """Validate an observation series against the model's kind."""
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] < 1:
            raise ValueError("observation series must be 1-d with T >= 1")
        if self.obs_kind == "count":
            if not np.all((y >= 0) & (y == np.floor(y))):
                raise ValueError("count model requires integer observations >= 0")
        return np.asarray(y, dtype=float)


def _sigma_prior_logpdf(sigma):
    # Gamma(a, b) on 1/sigma^2 mapped to sigma via |d(sigma^-2)/d sigma| = 2 sigma^-3
    if sigma <= 0:
        return -np.inf
    a, b = _GAMMA_A, _GAMMA_B
    return (
        np.log(2.0)
        + a * np.log(b)
        - gammaln(a)
        - (2.0 * a + 1.0) * np.log(sigma)
        - b / sigma**2
    )


def _sigma_prior_grad(sigma):
    a, b = _GAMMA_A, _GAMMA_B
    return -(2.0 * a + 1.0) / sigma + 2.0 * b / sigma**3


def _stationary_init_logpdf(theta_rho, theta_sigma, h1):
    var = theta_sigma**2 / (1.0 - theta_rho**2)
    return -0.5 * np.log(var) - _HALF_LOG_2PI - 0.5 * h1**2 / var


def _stationary_init_grads(rho, sigma, h1):
    """d log mu / d rho and d log mu / d sigma for the N(0, s^2/(1-rho^2)) start."""
    g_rho = h1**2 * rho / sigma**2 - rho / (1.0 - rho**2)
    g_sigma = -1.0 / sigma + h1**2 * (1.0 - rho**2) / sigma**3
    return g_rho, g_sigma


def make_poisson_model():
    """Poisson count model: y_t ~ Po(exp(h_t + alpha)), AR(1) latent state.

    Parameters are theta = (rho, alpha, sigma_h) with priors
    rho ~ Uniform[-1, 1], alpha ~ N(0, 10^2) and 1/sigma_h^2 ~ Gamma(0.01, 0.01)
    expressed as a density on sigma_h.  Support requires |rho| < 1 and
    sigma_h > 0.
    """
    names = ("rho", "alpha", "sigma_h")

    def in_support(theta):
        rho, _, sigma = theta
        return bool(abs(rho) < 1.0 and sigma > 0.0)

    def log_init(theta, h1):
        return _stationary_init_logpdf(theta[0], theta[2], np.asarray(h1, dtype=float))

    def log_trans(theta, h_t, h_prev):
        rho, _, sigma = theta
        z = (np.asarray(h_t, dtype=float) - rho * np.asarray(h_prev, dtype=float)) / sigma
        return -np.log(sigma) - _HALF_LOG_2PI - 0.5 * z**2

    def log_obs(theta, y_t, h_t):
        alpha = theta[1]
        h = np.asarray(h_t, dtype=float)
        y = np.asarray(y_t, dtype=float)
        eta = h + alpha
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def sample_init(theta, rng, size=None):
        rho, _, sigma = theta
        sd = sigma / np.sqrt(1.0 - rho**2)
        return rng.normal(0.0, sd, size=size)

    def sample_trans(theta, h_prev, rng):
        rho, _, sigma = theta
        h_prev = np.asarray(h_prev, dtype=float)
        return rho * h_prev + sigma * rng.standard_normal(size=h_prev.shape)

    def sample_obs(theta, h_t, rng):
        alpha = theta[1]
        lam = np.exp(np.asarray(h_t, dtype=float) + alpha)
        return rng.poisson(lam)

    def grad_log_init(theta, h1):
        rho, _, sigma = theta
        h1 = np.asarray(h1, dtype=float)
        g_rho, g_sigma = _stationary_init_grads(rho, sigma, h1)
        return np.stack([g_rho, np.zeros_like(h1), g_sigma], axis=-1)

    def grad_log_trans(theta, h_t, h_prev):
        rho, _, sigma = theta
        h_t = np.asarray(h_t, dtype=float)
        h_prev = np.asarray(h_prev, dtype=float)
        resid = h_t - rho * h_prev
        g_rho = h_prev * resid / sigma**2
        g_sigma = -1.0 / sigma + resid**2 / sigma**3
        return np.stack([g_rho, np.zeros_like(resid), g_sigma], axis=-1)

    def grad_log_obs(theta, y_t, h_t):
        alpha = theta[1]
        h = np.asarray(h_t, dtype=float)
        y = np.asarray(y_t, dtype=float)
        g_alpha = y - np.exp(h + alpha)
        zeros = np.zeros_like(g_alpha)
        return np.stack([zeros, g_alpha, zeros], axis=-1)

    def log_prior(theta):
        if not in_support(theta):
            return -np.inf
        _, alpha, sigma = theta
        lp = -np.log(2.0)  # rho ~ U[-1, 1]
        lp += -np.log(10.0) - _HALF_LOG_2PI - 0.5 * alpha**2 / 100.0
        lp += _sigma_prior_logpdf(sigma)
        return float(lp)

    def grad_log_prior(theta):
        _, alpha, sigma = theta
        return np.array([0.0, -alpha / 100.0, _sigma_prior_grad(sigma)])

    def sample_prior(rng):
        precision = rng.gamma(shape=_GAMMA_A, scale=1.0 / _GAMMA_B)
        return np.array(
            [rng.uniform(-1.0, 1.0), rng.normal(0.0, 10.0), 1.0 / np.sqrt(precision)]
        )

    return ModelDefinition(
        name="poisson",
        d_theta=3,
        param_names=names,
        obs_kind="count",
        log_init=log_init,
        log_trans=log_trans,
        log_obs=log_obs,
        sample_init=sample_init,
        sample_trans=sample_trans,
        sample_obs=sample_obs,
        grad_log_init=grad_log_init,
        grad_log_trans=grad_log_trans,
        grad_log_obs=grad_log_obs,
        log_prior=log_prior,
        grad_log_prior=grad_log_prior,
        in_support=in_support,
        sample_prior=sample_prior,
        ar1=GaussianAR1(
            params=lambda theta: (theta[0], 0.0, theta[2]),
            trans_grad_coeffs=lambda theta: (
                np.zeros(3),
                np.array([0.0, 0.0, 1.0 / theta[2]]),
                np.array([1.0 / theta[2], 0.0, 0.0]),
            ),
            obs_grad=grad_log_obs,
            init_grad=grad_log_init,
        ),
        grad_groups=((0,), (1,), (2,)),
    )


def make_lgssm_model(d):
    """Linear Gaussian model with an averaged shift in the transition.

    y_t ~ N(h_t, sigma_y^2) and h_t ~ N(rho*h_{t-1} + mean(kappa), sigma_h^2)
    with theta = (kappa_1..kappa_d, sigma_y, sigma_h, rho), d_theta = d + 3.
    Priors: kappa_j ~ N(0, 10^2), sigma_y and sigma_h carry the Gamma prior
    on their precision, rho ~ Uniform[-1, 1].
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    names = tuple(f"kappa_{j + 1}" for j in range(d)) + ("sigma_y", "sigma_h", "rho")
    d_theta = d + 3
    i_sy, i_sh, i_rho = d, d + 1, d + 2

    def unpack(theta):
        return theta[:d], theta[i_sy], theta[i_sh], theta[i_rho]

    def in_support(theta):
        _, sigma_y, sigma_h, rho = unpack(theta)
        return bool(abs(rho) < 1.0 and sigma_h > 0.0 and sigma_y > 0.0)

    def log_init(theta, h1):
        _, _, sigma_h, rho = unpack(theta)
        return _stationary_init_logpdf(rho, sigma_h, np.asarray(h1, dtype=float))

    def log_trans(theta, h_t, h_prev):
        kappa, _, sigma_h, rho = unpack(theta)
        mean_shift = np.mean(kappa)
        z = (
            np.asarray(h_t, dtype=float)
            - rho * np.asarray(h_prev, dtype=float)
            - mean_shift
        ) / sigma_h
        return -np.log(sigma_h) - _HALF_LOG_2PI - 0.5 * z**2

    def log_obs(theta, y_t, h_t):
        _, sigma_y, _, _ = unpack(theta)
        z = (np.asarray(y_t, dtype=float) - np.asarray(h_t, dtype=float)) / sigma_y
        return -np.log(sigma_y) - _HALF_LOG_2PI - 0.5 * z**2

    def sample_init(theta, rng, size=None):
        _, _, sigma_h, rho = unpack(theta)
        sd = sigma_h / np.sqrt(1.0 - rho**2)
        return rng.normal(0.0, sd, size=size)

    def sample_trans(theta, h_prev, rng):
        kappa, _, sigma_h, rho = unpack(theta)
        h_prev = np.asarray(h_prev, dtype=float)
        return (
            rho * h_prev
            + np.mean(kappa)
            + sigma_h * rng.standard_normal(size=h_prev.shape)
        )

    def sample_obs(theta, h_t, rng):
        _, sigma_y, _, _ = unpack(theta)
        h = np.asarray(h_t, dtype=float)
        return h + sigma_y * rng.standard_normal(size=h.shape)

    def grad_log_init(theta, h1):
        _, _, sigma_h, rho = unpack(theta)
        h1 = np.asarray(h1, dtype=float)
        g_rho, g_sigma = _stationary_init_grads(rho, sigma_h, h1)
        out = np.zeros(h1.shape + (d_theta,))
        out[..., i_sh] = g_sigma
        out[..., i_rho] = g_rho
        return out

    def grad_log_trans(theta, h_t, h_prev):
        kappa, _, sigma_h, rho = unpack(theta)
        h_t = np.asarray(h_t, dtype=float)
        h_prev = np.asarray(h_prev, dtype=float)
        resid = h_t - rho * h_prev - np.mean(kappa)
        out = np.zeros(resid.shape + (d_theta,))
        out[..., :d] = (resid / (sigma_h**2 * d))[..., None]
        out[..., i_sh] = -1.0 / sigma_h + resid**2 / sigma_h**3
        out[..., i_rho] = h_prev * resid / sigma_h**2
        return out

    def grad_log_obs(theta, y_t, h_t):
        _, sigma_y, _, _ = unpack(theta)
        resid = np.asarray(y_t, dtype=float) - np.asarray(h_t, dtype=float)
        out = np.zeros(resid.shape + (d_theta,))
        out[..., i_sy] = -1.0 / sigma_y + resid**2 / sigma_y**3
        return out

    def log_prior(theta):
        if not in_support(theta):
            return -np.inf
        kappa, sigma_y, sigma_h, _ = unpack(theta)
        lp = -np.log(2.0)
        lp += np.sum(-np.log(10.0) - _HALF_LOG_2PI - 0.5 * kappa**2 / 100.0)
        lp += _sigma_prior_logpdf(sigma_y) + _sigma_prior_logpdf(sigma_h)
        return float(lp)

    def grad_log_prior(theta):
        kappa, sigma_y, sigma_h, _ = unpack(theta)
        out = np.zeros(d_theta)
        out[:d] = -kappa / 100.0
        out[i_sy] = _sigma_prior_grad(sigma_y)
        out[i_sh] = _sigma_prior_grad(sigma_h)
        return out

    def sample_prior(rng):
        out = np.empty(d_theta)
        out[:d] = rng.normal(0.0, 10.0, d)
        out[i_sy] = 1.0 / np.sqrt(rng.gamma(shape=_GAMMA_A, scale=1.0 / _GAMMA_B))
        out[i_sh] = 1.0 / np.sqrt(rng.gamma(shape=_GAMMA_A, scale=1.0 / _GAMMA_B))
        out[i_rho] = rng.uniform(-1.0, 1.0)
        return out

    # compressed gradients over the groups (kappa block, sigma_y, sigma_h, rho)
    def _obs_grad_c(theta, y_t, h_t):
        _, sigma_y, _, _ = unpack(theta)
        resid = np.asarray(y_t, dtype=float) - np.asarray(h_t, dtype=float)
        out = np.zeros(resid.shape + (4,))
        out[..., 1] = -1.0 / sigma_y + resid**2 / sigma_y**3
        return out

    def _init_grad_c(theta, h1):
        _, _, sigma_h, rho = unpack(theta)
        h1 = np.asarray(h1, dtype=float)
        g_rho, g_sigma = _stationary_init_grads(rho, sigma_h, h1)
        out = np.zeros(h1.shape + (4,))
        out[..., 2] = g_sigma
        out[..., 3] = g_rho
        return out

    def _trans_coeffs(theta):
        _, _, sigma_h, _ = unpack(theta)
        return (
            np.array([1.0 / (sigma_h * d), 0.0, 0.0, 0.0]),
            np.array([0.0, 0.0, 1.0 / sigma_h, 0.0]),
            np.array([0.0, 0.0, 0.0, 1.0 / sigma_h]),
        )

    return ModelDefinition(
        name="lgssm",
        d_theta=d_theta,
        param_names=names,
        obs_kind="real",
        log_init=log_init,
        log_trans=log_trans,
        log_obs=log_obs,
        sample_init=sample_init,
        sample_trans=sample_trans,
        sample_obs=sample_obs,
        grad_log_init=grad_log_init,
        grad_log_trans=grad_log_trans,
        grad_log_obs=grad_log_obs,
        log_prior=log_prior,
        grad_log_prior=grad_log_prior,
        in_support=in_support,
        sample_prior=sample_prior,
        ar1=GaussianAR1(
            params=lambda theta: (theta[i_rho], float(np.mean(theta[:d])), theta[i_sh]),
            trans_grad_coeffs=_trans_coeffs,
            obs_grad=_obs_grad_c,
            init_grad=_init_grad_c,
        ),
        grad_groups=(tuple(range(d)), (i_sy,), (i_sh,), (i_rho,)),
    )


def simulate_dataset(model, theta, T, seed):
    """Draw (h_{1:T}, y_{1:T}) by ancestral sampling; deterministic given seed.

    Parameters
    ----------
    model: ModelDefinition
    theta: ParamVector or 1-d array
    T: int, number of time steps (>= 1)
    seed: int or numpy SeedSequence

    Returns
    -------
    (h, y): two arrays of length T.
    """
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    if T < 1:
        raise ValueError("T must be >= 1")
    if not model.in_support(theta):
        raise ValueError("theta outside the prior support")
    rng = np.random.default_rng(seed)
    h = np.empty(T)
    h[0] = model.sample_init(theta, rng)
    for t in range(1, T):
        h[t] = model.sample_trans(theta, h[t - 1], rng)
    y = model.sample_obs(theta, h, rng)
    return h, np.asarray(y)
