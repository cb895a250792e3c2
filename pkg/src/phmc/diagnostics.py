"""Chain diagnostics and exact oracles.

Contains the exact Kalman evaluation of the linear Gaussian model's marginal
likelihood, a central finite-difference gradient helper, the sample
autocorrelation function, and chain/latent summaries.  The oracles live here,
away from the model definitions, so they can safely double-check particle
estimates in tests and experiments.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedAcfError

__all__ = [
    "ChainSummary",
    "LatentSummary",
    "kalman_log_likelihood",
    "finite_difference_score",
    "acf",
    "summarize_chain",
    "summarize_latents",
]


@dataclass
class ChainSummary:
    param_names: tuple
    mean: np.ndarray
    sd: np.ndarray
    q2_5: np.ndarray
    q50: np.ndarray
    q97_5: np.ndarray
    acf: np.ndarray  # (d_theta, max_lag + 1)
    acceptance_rate: float

    def as_dict(self):
        return {
            "acceptance_rate": self.acceptance_rate,
            "params": {
                name: {
                    "mean": float(self.mean[i]),
                    "sd": float(self.sd[i]),
                    "q2.5": float(self.q2_5[i]),
                    "q50": float(self.q50[i]),
                    "q97.5": float(self.q97_5[i]),
                    "acf": [float(a) for a in self.acf[i]],
                }
                for i, name in enumerate(self.param_names)
            },
        }


@dataclass
class LatentSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def kalman_log_likelihood(theta, y, d):
    """Exact log marginal likelihood of the linear Gaussian model.

    Runs the standard prediction/update recursion for the scalar-state model
    with transition mean rho*h + mean(kappa), observation variance sigma_y^2,
    and stationary initial distribution N(0, sigma_h^2 / (1 - rho^2)).

    Parameters
    ----------
    theta: array-like, ordered (kappa_1..kappa_d, sigma_y, sigma_h, rho)
    y: observation series
    d: number of kappa components

    Returns
    -------
    float, log p_theta(y_{1:T}).
    """
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    if theta.shape[0] != d + 3:
        raise ValueError("theta must have length d + 3")
    y = np.asarray(y, dtype=float)
    sigma_y, sigma_h, rho = theta[d], theta[d + 1], theta[d + 2]
    if abs(rho) >= 1.0:
        raise ValueError("|rho| must be < 1 for the stationary initialization")
    drift = float(np.mean(theta[:d]))
    r_var = sigma_y**2
    q_var = sigma_h**2

    m_pred = 0.0
    p_pred = q_var / (1.0 - rho**2)
    loglik = 0.0
    for t in range(y.shape[0]):
        s = p_pred + r_var
        resid = y[t] - m_pred
        loglik += -0.5 * (np.log(2.0 * np.pi * s) + resid**2 / s)
        gain = p_pred / s
        m_filt = m_pred + gain * resid
        p_filt = (1.0 - gain) * p_pred
        m_pred = rho * m_filt + drift
        p_pred = rho**2 * p_filt + q_var
    return float(loglik)


def finite_difference_score(loglik, theta, delta=1e-5):
    """Central finite differences of ``loglik`` at ``theta``, one component at a time."""
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    if delta <= 0:
        raise ValueError("delta must be > 0")
    out = np.empty(theta.shape[0])
    for i in range(theta.shape[0]):
        up = theta.copy()
        dn = theta.copy()
        up[i] += delta
        dn[i] -= delta
        out[i] = (loglik(up) - loglik(dn)) / (2.0 * delta)
    return out


def acf(series, max_lag):
    """Sample autocorrelation at lags 0..max_lag (biased estimator)."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if not 0 <= max_lag < n:
        raise ValueError("need n > max_lag >= 0")
    xc = x - x.mean()
    c0 = np.dot(xc, xc) / n
    if c0 == 0.0:
        raise UndefinedAcfError("series is constant; autocorrelation undefined")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = np.dot(xc[:-k], xc[k:]) / n / c0
    return out


def summarize_chain(out, max_lag=50):
    """Per-parameter summary of kept draws plus ACF head and acceptance rate."""
    if not out.draws:
        raise ValueError("chain has no kept draws")
    thetas = np.array([d[0].values for d in out.draws])
    names = out.draws[0][0].names
    max_lag = min(max_lag, thetas.shape[0] - 1)
    q = np.percentile(thetas, [2.5, 50.0, 97.5], axis=0)
    acfs = np.empty((thetas.shape[1], max_lag + 1))
    for i in range(thetas.shape[1]):
        try:
            acfs[i] = acf(thetas[:, i], max_lag)
        except UndefinedAcfError:
            acfs[i] = np.nan
            acfs[i, 0] = 1.0
    return ChainSummary(
        param_names=names,
        mean=thetas.mean(axis=0),
        sd=thetas.std(axis=0, ddof=1) if thetas.shape[0] > 1 else np.zeros(thetas.shape[1]),
        q2_5=q[0],
        q50=q[1],
        q97_5=q[2],
        acf=acfs,
        acceptance_rate=out.acceptance_rate,
    )


def summarize_latents(out):
    """Per-time posterior mean and central 95% interval of the latent path."""
    if not out.draws:
        raise ValueError("chain has no kept draws")
    trajs = np.array([d[1] for d in out.draws])
    lower, upper = np.percentile(trajs, [2.5, 97.5], axis=0)
    return LatentSummary(mean=trajs.mean(axis=0), lower=lower, upper=upper)
