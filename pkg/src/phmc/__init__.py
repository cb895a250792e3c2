"""Particle Hamiltonian Monte Carlo for state-space models.

Building blocks: state-space model definitions with analytic parameter
gradients (:mod:`phmc.model`), a bootstrap particle filter with adaptive
resampling and unbiased likelihood estimation (:mod:`phmc.smc`), particle
score estimators (:mod:`phmc.gradients`), the samplers -- reference HMC,
particle marginal Metropolis-Hastings, and particle HMC
(:mod:`phmc.samplers`) -- and diagnostics with exact oracles
(:mod:`phmc.diagnostics`).  The :mod:`phmc.cli` module drives the
experiment commands.
"""

from .model import (
    GaussianAR1,
    ModelDefinition,
    ParamVector,
    make_lgssm_model,
    make_poisson_model,
    simulate_dataset,
)
from .smc import (
    FilterConfig,
    FilterResult,
    ParticleSystem,
    ess,
    log_marginal_increments,
    resample,
    run_filter,
)
from .gradients import ScoreEstimate, score_linear, score_quadratic, score_quadratic_step
from .samplers import ChainOutput, SamplerConfig, hmc, leapfrog, phmc, pmmh
from .diagnostics import (
    ChainSummary,
    LatentSummary,
    acf,
    finite_difference_score,
    kalman_log_likelihood,
    summarize_chain,
    summarize_latents,
)
from .errors import (
    DegenerateBackwardKernelError,
    DegenerateFilterError,
    DivergenceError,
    UndefinedAcfError,
)

__version__ = "0.1.0"
