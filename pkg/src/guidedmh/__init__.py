"""Haar-mixture Metropolis kernels, non-reversible guided variants, and a
benchmark harness for comparing them."""

from .diagnostics import EssReport, acceptance_rate, autocovariance, ess, summarize
from .errors import (ChainAbortedError, ConfigError, DegenerateStatisticError,
                     GuidedLoopError)
from .groups import (
    Direction,
    GroupSpec,
    Statistic,
    delta_prod,
    delta_quadform,
    delta_sum,
    mlex_leq,
)
from .kernels import (
    ARFamily,
    BetaGammaFamily,
    ChiSquaredFamily,
    MixtureDraw,
    ar_propose,
    betagamma_propose,
    chisq_propose,
    haar_mixture_propose,
    log_mu,
    log_mu_star,
    mixing_draw,
)
from .primitives import (
    CholFactor,
    RngStream,
    mvnormal_logpdf,
    sample_beta,
    sample_gamma,
    sample_mvnormal,
    sample_noncentral_chisq,
)
from .samplers import (
    ChainTrace,
    GuidedMetropolisHaarKernel,
    GuidedState,
    MalaKernel,
    MetropolisHaarKernel,
    PlainMetropolisKernel,
    RandomWalkKernel,
    StepOutcome,
    guided_step,
    mala_step,
    metropolis_haar_step,
    metropolis_step,
    run_chain,
    rwm_step,
)
from .targets import (
    PoissonHierData,
    TargetModel,
    central_t_target,
    gamma_product_target,
    gaussian_target,
    gibbs_theta,
    hier_logpost,
    load_design_csv,
    logistic_grad,
    logistic_logpost,
    logistic_target,
    mvt_logdensity,
    scaled_t_target,
    simulate_hier_data,
    simulate_logistic_data,
)

__version__ = "0.1.0"
