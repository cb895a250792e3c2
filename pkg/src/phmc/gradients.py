"""Particle estimators of the score and the log-posterior gradient.

Two estimators are provided, both built from a completed filter run:

* :func:`score_linear` -- O(N T) path-based estimator.  Each particle carries
  the accumulated gradient of its ancestral path; the estimate is the
  weighted average of the final-time carriers.  Cheap, but repeated
  resampling collapses the distinct paths (path degeneracy), so its variance
  grows quickly with T.
* :func:`score_quadratic` -- O(N^2 T) online estimator.  At every step the
  per-particle gradient is refreshed as a mixture over *all* previous
  particles, weighted by the backward kernel
  v_ij ∝ W_{t-1}^i f(h_t^j | h_{t-1}^i), which removes the dependence on the
  surviving ancestral tree.

The quadratic recursion here propagates one backward-marginalized gradient
vector per particle.  For the built-in models (Gaussian AR(1) transitions)
the recursion is dispatched to fused numba kernels, including a Hermite
fast-Gauss-transform evaluation of the mixture sums; the generic numpy
implementation below is the reference the fast kernels are tested against.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBackwardKernelError

__all__ = [
    "ScoreEstimate",
    "score_linear",
    "score_quadratic_step",
    "score_quadratic",
]


@dataclass
class ScoreEstimate:
    """Score (d log-likelihood) and log-posterior gradient estimates."""

    score: np.ndarray
    posterior_grad: np.ndarray
    kind: str


def _theta_array(theta):
    return np.asarray(getattr(theta, "values", theta), dtype=float)


def _weighted_sum(W, g):
    # zero-weight particles may carry non-finite gradients (dead branches);
    # their contribution is exactly zero, so mask instead of multiplying
    safe = np.where(W[:, None] > 0.0, g, 0.0)
    return W @ safe


def score_linear(model, theta, system, y):
    """O(N) path-based score estimate from a completed filter run.

    Initializes each particle's carrier with the time-1 observation and
    initial-density gradients, then accumulates observation and transition
    gradients along the ancestral links.
    """
    theta = _theta_array(theta)
    y = np.asarray(y, dtype=float)
    particles = system.particles
    T, N = particles.shape
    if y.shape[0] != T:
        raise ValueError("observation series length does not match the system")

    g = model.grad_log_obs(theta, y[0], particles[0]) + model.grad_log_init(
        theta, particles[0]
    )
    for t in range(1, T):
        a = system.ancestors[t]
        parents = particles[t - 1, a]
        g = (
            g[a]
            + model.grad_log_trans(theta, particles[t], parents)
        ) + model.grad_log_obs(theta, y[t], particles[t])
    score = _weighted_sum(system.W[-1], g)
    prior = model.grad_log_prior(theta)
    return ScoreEstimate(score=score, posterior_grad=score + prior, kind="linear")


def score_quadratic_step(
    model, theta, prev_particles, prev_W, prev_g, new_particles, y_t, t=None
):
    """One backward-marginalized update of the per-particle gradient table.

    For each new particle j the mixture weights over previous particles i are
    v_ij ∝ prev_W_i * f(new_j | prev_i), normalized over i in the log domain,
    and the new table entry is
    sum_i v_ij (prev_g_i + grad log f(new_j | prev_i)) + grad log g(y_t | new_j).

    Raises
    ------
    DegenerateBackwardKernelError
        if no previous particle carries transition mass to some new particle.
    """
    theta = _theta_array(theta)
    prev_particles = np.asarray(prev_particles, dtype=float)
    new_particles = np.asarray(new_particles, dtype=float)
    prev_g = np.asarray(prev_g, dtype=float)
    N_prev = prev_particles.shape[0]
    N_new = new_particles.shape[0]
    if prev_g.shape[0] != N_prev or len(prev_W) != N_prev:
        raise ValueError("prev tables must share the particle axis")

    with np.errstate(divide="ignore"):
        log_v = np.log(np.asarray(prev_W, dtype=float))[:, None] + model.log_trans(
            theta, new_particles[None, :], prev_particles[:, None]
        )  # (N_prev, N_new)
    m = log_v.max(axis=0)
    bad = ~np.isfinite(m)
    if bad.any():
        raise DegenerateBackwardKernelError(t, int(np.flatnonzero(bad)[0]))
    v = np.exp(log_v - m[None, :])
    v /= v.sum(axis=0, keepdims=True)

    trans_grad = model.grad_log_trans(
        theta, new_particles[None, :], prev_particles[:, None]
    )  # (N_prev, N_new, d_theta)
    prev_g_safe = np.where(np.asarray(prev_W, dtype=float)[:, None] > 0.0, prev_g, 0.0)
    mixed = np.einsum("ij,ijk->jk", v, prev_g_safe[:, None, :] + trans_grad)
    return mixed + model.grad_log_obs(theta, y_t, new_particles)


def _quadratic_prev_tables(system, g, t):
    """Previous-generation mixture for step t, honoring the carried weights.

    When resampling produced the ancestors at step t the filter carries the
    resampled particle set with uniform weights, so the mixture runs over
    that set; otherwise it runs over the full time t-1 cloud with its
    normalized weights.
    """
    N = system.N
    if system.resampled[t]:
        idx = system.ancestors[t]
        return system.particles[t - 1, idx], np.full(N, 1.0 / N), g[idx]
    return system.particles[t - 1], system.W[t - 1], g


def score_quadratic(model, theta, system, y, strategy="auto"):
    """O(N^2) online score estimate from a completed filter run.

    ``strategy`` selects the implementation: "generic" runs the numpy
    reference above; "direct" and "fgt" force the corresponding fused kernel
    for models with Gaussian AR(1) transitions; "auto" uses the kernels for
    such models, choosing per step between the direct pass and the
    fast-Gauss-transform evaluation based on particle count and spread.
    """
    theta = _theta_array(theta)
    y = np.asarray(y, dtype=float)
    T, N = system.particles.shape
    if y.shape[0] != T:
        raise ValueError("observation series length does not match the system")

    if strategy not in ("auto", "generic", "direct", "fgt"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy in ("direct", "fgt") and model.ar1 is None:
        raise ValueError("kernel strategies need a Gaussian AR(1) model")
    # T == 1 has no backward step: evaluate the shared base case so the
    # result coincides with score_linear exactly
    use_fast = model.ar1 is not None and strategy != "generic" and T > 1

    if use_fast:
        from . import _fastpath

        g = _fastpath.quadratic_tables(model, theta, system, y, strategy)
        score_c = _weighted_sum(system.W[-1], g)
        score = np.empty(model.d_theta)
        for k, group in enumerate(model.grad_groups):
            for c in group:
                score[c] = score_c[k]
    else:
        g = model.grad_log_obs(theta, y[0], system.particles[0]) + model.grad_log_init(
            theta, system.particles[0]
        )
        for t in range(1, T):
            prev_p, prev_W, prev_g = _quadratic_prev_tables(system, g, t)
            g = score_quadratic_step(
                model, theta, prev_p, prev_W, prev_g, system.particles[t], y[t], t=t + 1
            )
        score = _weighted_sum(system.W[-1], g)

    prior = model.grad_log_prior(theta)
    return ScoreEstimate(score=score, posterior_grad=score + prior, kind="quadratic")
