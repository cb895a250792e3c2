"""Sequential importance sampling with resampling (bootstrap particle filter).

The filter propagates ``N`` particles with the model's transition prior, so
incremental weights reduce to observation densities.  Resampling is adaptive:
ancestors are redrawn whenever the effective sample size of the previous
weights drops to ``ess_threshold_fraction * N`` or below, and the carried
weight is reset to one.  All weights are kept in the log domain; normalized
weights are materialized once per step.

The run also accumulates the unbiased marginal-likelihood estimate and can
sample one latent trajectory by tracing ancestors back from a draw at the
final time.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFilterError

__all__ = [
    "FilterConfig",
    "ParticleSystem",
    "FilterResult",
    "ess",
    "resample",
    "run_filter",
    "log_marginal_increments",
]

RESAMPLING_SCHEMES = ("systematic", "stratified", "multinomial")


@dataclass
class FilterConfig:
    N: int = 500
    ess_threshold_fraction: float = 0.5
    resampling: str = "systematic"
    proposal: str = "bootstrap"

    def __post_init__(self):
        # N = 1 is the degenerate single-path filter; useful for tests
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 < self.ess_threshold_fraction <= 1.0:
            raise ValueError("ess_threshold_fraction must be in (0, 1]")
        if self.resampling not in RESAMPLING_SCHEMES:
            raise ValueError(f"unknown resampling scheme {self.resampling!r}")
        if self.proposal != "bootstrap":
            raise ValueError("only the bootstrap proposal is implemented")


@dataclass
class ParticleSystem:
    """Full particle history of one filter run (time on the first axis)."""

    particles: np.ndarray  # (T, N)
    log_w: np.ndarray      # (T, N) unnormalized log-weights
    W: np.ndarray          # (T, N) normalized weights
    ancestors: np.ndarray  # (T, N) int, identity where no resampling occurred
    resampled: np.ndarray  # (T,) bool; resampled[t] refers to the move t-1 -> t
    ess: np.ndarray        # (T,) effective sample size of W[t]

    @property
    def T(self):
        return self.particles.shape[0]

    @property
    def N(self):
        return self.particles.shape[1]


@dataclass
class FilterResult:
    log_z: float
    trajectory: np.ndarray  # (T,) sampled latent path
    system: ParticleSystem
    traj_indices: Optional[np.ndarray] = None  # (T,) particle index path
    score: Optional[object] = None  # ScoreEstimate when requested
    n_random_draws: int = 0


def ess(W):
    """Effective sample size 1 / sum(W_i^2) of normalized weights."""
    W = np.asarray(W, dtype=float)
    total = W.sum()
    if np.isnan(total) or abs(total - 1.0) > 1e-9:
        raise ValueError("weights must be normalized to sum to 1")
    return 1.0 / np.sum(W**2)


def _inverse_cdf(cum, points):
    idx = np.searchsorted(cum, points, side="right")
    return np.minimum(idx, cum.shape[0] - 1)


def resample(W, N, scheme="systematic", rng=None, u=None):
    """Draw N ancestor indices from normalized weights W.

    For every scheme the expected offspring count of particle i is N * W_i.
    ``systematic`` uses a single uniform u ~ U[0, 1/N) and the comb
    u + k/N; ``stratified`` draws one uniform per stratum; ``multinomial``
    draws i.i.d. categorical indices.  ``u`` injects the uniform(s) in place
    of the rng (tests only).
    """
    W = np.asarray(W, dtype=float)
    if np.isnan(W).any():
        raise ValueError("weights contain NaN")
    if N < 1:
        raise ValueError("N must be >= 1")
    cum = np.cumsum(W)
    if scheme == "systematic":
        u0 = (rng.random() if u is None else float(u)) / N
        points = u0 + np.arange(N) / N
    elif scheme == "stratified":
        us = rng.random(N) if u is None else np.asarray(u, dtype=float)
        points = (np.arange(N) + us) / N
    elif scheme == "multinomial":
        points = rng.random(N) if u is None else np.asarray(u, dtype=float)
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    return _inverse_cdf(cum, points)


def _lse(log_w):
    # shared by run_filter and log_marginal_increments so that the stored
    # log_z and the recomputed increments agree bit for bit
    m = log_w.max()
    if m == -np.inf:
        return -np.inf
    return m + np.log(np.exp(log_w - m).sum())


def _normalize(log_w, t):
    m = log_w.max()
    if m == -np.inf:
        raise DegenerateFilterError(t)
    e = np.exp(log_w - m)
    total = e.sum()
    return e / total, m + np.log(total)


def run_filter(model, theta, y, cfg, rng, want_score="none"):
    """Run the bootstrap filter (optionally with an inline score estimate).

    Parameters
    ----------
    model: ModelDefinition
    theta: ParamVector or 1-d array
    y: observation series, length T
    cfg: FilterConfig
    rng: numpy Generator
    want_score: "none", "linear" or "quadratic"

    Returns
    -------
    FilterResult with the log marginal-likelihood estimate, one sampled
    trajectory, the retained particle system, and the score estimate when
    requested.

    Raises
    ------
    DegenerateFilterError
        if every particle has zero weight at some time (carries ``t``).
    ValueError
        if theta lies outside the prior support.
    """
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    if not model.in_support(theta):
        raise ValueError("theta outside the prior support")
    if want_score not in ("none", "linear", "quadratic"):
        raise ValueError(f"unknown score kind {want_score!r}")
    y = model.check_observations(y)
    T = y.shape[0]
    N = cfg.N
    threshold = cfg.ess_threshold_fraction * N

    particles = np.empty((T, N))
    log_w = np.empty((T, N))
    W = np.empty((T, N))
    ancestors = np.tile(np.arange(N), (T, 1))
    resampled = np.zeros(T, dtype=bool)
    ess_t = np.empty(T)
    n_draws = 0

    increments = np.empty(T)
    particles[0] = model.sample_init(theta, rng, size=N)
    n_draws += N
    log_w[0] = model.log_obs(theta, y[0], particles[0])
    W[0], lse_prev = _normalize(log_w[0], t=1)
    ess_t[0] = 1.0 / np.sum(W[0] ** 2)
    increments[0] = lse_prev - np.log(N)

    for t in range(1, T):
        if ess_t[t - 1] <= threshold:
            resampled[t] = True
            ancestors[t] = resample(W[t - 1], N, cfg.resampling, rng)
            n_draws += 1 if cfg.resampling == "systematic" else N
            carried = 0.0
        else:
            carried = log_w[t - 1]
        parents = particles[t - 1, ancestors[t]]
        particles[t] = model.sample_trans(theta, parents, rng)
        n_draws += N
        log_w[t] = model.log_obs(theta, y[t], particles[t]) + carried
        W[t], lse = _normalize(log_w[t], t=t + 1)
        ess_t[t] = 1.0 / np.sum(W[t] ** 2)
        if resampled[t]:
            increments[t] = lse - np.log(N)
        else:
            increments[t] = lse - lse_prev
        lse_prev = lse
    log_z = np.sum(increments)

    system = ParticleSystem(
        particles=particles,
        log_w=log_w,
        W=W,
        ancestors=ancestors,
        resampled=resampled,
        ess=ess_t,
    )

    # trajectory: draw b_T ~ Categorical(W_T), then trace b_{t-1} = a_t^{b_t}
    b = int(np.searchsorted(np.cumsum(W[-1]), rng.random(), side="right"))
    b = min(b, N - 1)
    n_draws += 1
    trajectory = np.empty(T)
    traj_indices = np.empty(T, dtype=np.int64)
    for t in range(T - 1, -1, -1):
        trajectory[t] = particles[t, b]
        traj_indices[t] = b
        b = int(ancestors[t, b])

    score = None
    if want_score != "none":
        from . import gradients

        if want_score == "linear":
            score = gradients.score_linear(model, theta, system, y)
        else:
            score = gradients.score_quadratic(model, theta, system, y)

    return FilterResult(
        log_z=float(log_z),
        trajectory=trajectory,
        system=system,
        traj_indices=traj_indices,
        score=score,
        n_random_draws=n_draws,
    )


def log_marginal_increments(system):
    """Per-time log-likelihood increments; their sum telescopes to log_z."""
    log_w = system.log_w
    T, N = log_w.shape
    out = np.empty(T)
    lse_prev = _lse(log_w[0])
    out[0] = lse_prev - np.log(N)
    for t in range(1, T):
        lse = _lse(log_w[t])
        if system.resampled[t]:
            out[t] = lse - np.log(N)
        else:
            out[t] = lse - lse_prev
        lse_prev = lse
    return out
