"""Linear Gaussian inverse problems with generative-model priors.

Two inference routes around a trained probabilistic generator:

* latent-space MAP through the deterministic mean map (estimates restricted
  to the generator's image manifold), and
* variable-space inference with a Laplace-approximated Gaussian prior
  (closed-form posterior, consistent as the noise vanishes),

plus an oracle-regularized L2 baseline, a virtual-data method selector, and
the deblurring experiment harness behind the ``genprior`` CLI.
"""

__version__ = "0.1.0"

from .baselines import GuideVerdict, guide, l2_oracle, l2_solve
from .forward_model import BlurOperator, LinearModel, build_blur, observe, psnr
from .generator import (
    CovHead,
    EncoderAbsentError,
    GeneratorNet,
    WeightsParseError,
    WeightsValidationError,
    encoder_mean,
    g_mean,
    gamma,
    jacobian,
    load_weights,
    sample_prior_draw,
    save_weights,
)
from .laplace_inference import (
    LaplacePosterior,
    LaplacePrior,
    laplace_asymptotic_cov,
    laplace_estimate,
    laplace_posterior,
    laplace_prior,
    least_squares_init,
    marginal_pixel_std,
    select_expansion_point,
)
from .latent_inference import (
    LatentPosterior,
    latent_asymptotic_cov,
    latent_estimate,
    latent_log_density,
    latent_log_density_grad,
    latent_map,
    latent_posterior_mean,
)
from .prior_oracle import mc_log_prior, mc_posterior_moments
from .unknown_variance import (
    IGPrior,
    marginal_latent_log_density,
    marginal_variable_log_density,
    marginal_variable_map,
)
